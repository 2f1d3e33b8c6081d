//! Direction grids on the unit sphere and far-field power-wave patterns.
//!
//! A [`FarFieldPattern`] stores one complex 2-vector per grid direction,
//! ordered as (theta-hat, phi-hat) components in units of sqrt(W/sr). The
//! squared Euclidean norm of a sample is the radiation intensity in W/sr and
//! the weighted sum of those intensities is the carried power.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Polarization-resolved sample: `[theta_hat, phi_hat]`.
pub type Jones = [C64; 2];

const ZERO: C64 = C64::new(0.0, 0.0);

/// A direction in the physicist's spherical convention, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    /// Builds a canonical direction.
    pub fn new(theta: f64, phi: f64) -> Self {
        Direction { theta, phi }.canonical()
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Self {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    /// Maps any (theta, phi) onto theta in [0, pi], phi in [0, 2 pi).
    ///
    /// A negative polar angle refers to `(-theta, phi + pi)`.
    pub fn canonical(self) -> Self {
        let mut theta = self.theta.rem_euclid(2.0 * PI);
        let mut phi = self.phi;
        if theta > PI {
            theta = 2.0 * PI - theta;
            phi += PI;
        }
        // rem_euclid maps e.g. -theta onto 2pi - theta, handled above.
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Direction { theta, phi }
    }

    pub fn from_unit_vector(v: &Vector3<f64>) -> Self {
        let n = v.norm();
        let z = (v.z / n).clamp(-1.0, 1.0);
        let theta = z.acos();
        let phi = if v.x == 0.0 && v.y == 0.0 {
            0.0
        } else {
            v.y.atan2(v.x)
        };
        Direction { theta, phi }.canonical()
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    pub fn theta_hat(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(ct * cp, ct * sp, -st)
    }

    pub fn phi_hat(&self) -> Vector3<f64> {
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(-sp, cp, 0.0)
    }

    /// The opposite direction `(pi - theta, phi + pi)`.
    pub fn antipode(&self) -> Self {
        Direction::new(PI - self.theta, self.phi + PI)
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }
}

/// Equiangular, cell-centred latitude-longitude grid with exact cell areas.
///
/// Directions are ordered ring by ring: index `i * n_phi + j` for polar ring
/// `i` and azimuth column `j`. The weight of each sample is the solid angle of
/// its cell, so the weights add up to 4 pi.
#[derive(Debug, Clone)]
pub struct DirectionGrid {
    n_theta: usize,
    n_phi: usize,
    directions: Vec<Direction>,
    weights: Vec<f64>,
}

impl PartialEq for DirectionGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_theta == other.n_theta && self.n_phi == other.n_phi
    }
}

impl DirectionGrid {
    /// `n_theta >= 2` rings and an even `n_phi >= 2` columns.
    pub fn latlon(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 2 {
            return Err(Error::invalid(format!(
                "grid needs n_theta >= 2 and n_phi >= 2, got ({n_theta}, {n_phi})"
            )));
        }
        if !n_phi.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "n_phi must be even for antipodal closure, got {n_phi}"
            )));
        }
        let d_theta = PI / n_theta as f64;
        let d_phi = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let theta = (i as f64 + 0.5) * d_theta;
            let lo = i as f64 * d_theta;
            let hi = (i + 1) as f64 * d_theta;
            let w = d_phi * (lo.cos() - hi.cos());
            for j in 0..n_phi {
                directions.push(Direction {
                    theta,
                    phi: j as f64 * d_phi,
                });
                weights.push(w);
            }
        }
        Ok(DirectionGrid {
            n_theta,
            n_phi,
            directions,
            weights,
        })
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights repeated once per polarization, matching the interleaved
    /// vector layout of [`FarFieldPattern::to_vector`].
    pub fn component_weights(&self) -> Vec<f64> {
        self.weights.iter().flat_map(|&w| [w, w]).collect()
    }

    pub fn direction(&self, index: usize) -> Direction {
        self.directions[index]
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn index(&self, ring: usize, column: usize) -> usize {
        ring * self.n_phi + column
    }

    pub fn d_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn d_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    /// Index of the antipodal sample of `index`.
    pub fn antipode_index(&self, index: usize) -> usize {
        let ring = index / self.n_phi;
        let col = index % self.n_phi;
        self.index(self.n_theta - 1 - ring, (col + self.n_phi / 2) % self.n_phi)
    }

    /// The latitude-longitude construction is closed when `n_phi` is even,
    /// which the constructor enforces.
    pub fn is_antipodally_closed(&self) -> bool {
        self.n_phi.is_multiple_of(2)
    }

    /// Index of the grid sample exactly at `d`, if any (to 1e-9 rad).
    pub fn find(&self, d: Direction) -> Option<usize> {
        let d = d.canonical();
        let t = d.theta / self.d_theta() - 0.5;
        let ring = t.round();
        if (t - ring).abs() * self.d_theta() > 1e-9 || ring < 0.0 || ring >= self.n_theta as f64 {
            return None;
        }
        let s = d.phi / self.d_phi();
        let col = s.round();
        if (s - col).abs() * self.d_phi() > 1e-9 {
            return None;
        }
        Some(self.index(ring as usize, col as usize % self.n_phi))
    }

    /// Bilinear interpolation stencil in (theta, phi) with azimuth wraparound.
    /// Beyond the first and last rings the stencil clamps to that ring.
    pub fn stencil(&self, d: Direction) -> [(usize, f64); 4] {
        let d = d.canonical();
        let t = d.theta / self.d_theta() - 0.5;
        let (r0, r1, f) = if t <= 0.0 {
            (0, 0, 0.0)
        } else if t >= (self.n_theta - 1) as f64 {
            (self.n_theta - 1, self.n_theta - 1, 0.0)
        } else {
            let r0 = t.floor() as usize;
            (r0, r0 + 1, t - r0 as f64)
        };
        let s = d.phi / self.d_phi();
        let c0f = s.floor();
        let g = s - c0f;
        let c0 = (c0f as usize) % self.n_phi;
        let c1 = (c0 + 1) % self.n_phi;
        [
            (self.index(r0, c0), (1.0 - f) * (1.0 - g)),
            (self.index(r0, c1), (1.0 - f) * g),
            (self.index(r1, c0), f * (1.0 - g)),
            (self.index(r1, c1), f * g),
        ]
    }

    /// CSV listing: `index,theta_deg,phi_deg,weight_sr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,theta_deg,phi_deg,weight_sr\n");
        for (i, (d, w)) in self.directions.iter().zip(&self.weights).enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{}",
                fmt_f64(d.theta_deg()),
                fmt_f64(d.phi_deg()),
                fmt_f64(*w)
            );
        }
        out
    }
}

/// Scientific notation with 17 significant digits; parsing it back is exact.
pub fn fmt_f64(x: f64) -> String {
    // Adding +0.0 folds -0.0 into 0.0 and leaves every other value unchanged.
    format!("{:.16e}", x + 0.0)
}

/// Sampled outgoing or incoming far-field power-wave pattern.
#[derive(Debug, Clone)]
pub struct FarFieldPattern {
    grid: Arc<DirectionGrid>,
    values: Vec<Jones>,
}

impl FarFieldPattern {
    pub fn zeros(grid: Arc<DirectionGrid>) -> Self {
        let n = grid.len();
        FarFieldPattern {
            grid,
            values: vec![[ZERO; 2]; n],
        }
    }

    pub fn new(grid: Arc<DirectionGrid>, values: Vec<Jones>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "far-field pattern",
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(FarFieldPattern { grid, values })
    }

    pub fn from_fn(grid: Arc<DirectionGrid>, mut f: impl FnMut(Direction) -> Jones) -> Self {
        let values = grid.directions().iter().map(|&d| f(d)).collect();
        FarFieldPattern { grid, values }
    }

    /// Focused incoming wave with coefficient `coeff` from grid sample `index`.
    ///
    /// The sample holds `coeff / weight` so that weighted sums against it pick
    /// out the integrand at that direction.
    pub fn impulse(grid: Arc<DirectionGrid>, index: usize, coeff: Jones) -> Self {
        let mut p = Self::zeros(grid);
        let w = p.grid.weight(index);
        p.values[index] = [coeff[0] / w, coeff[1] / w];
        p
    }

    /// Constant theta-polarized pattern carrying `power` watts.
    pub fn isotropic(grid: Arc<DirectionGrid>, power: f64) -> Self {
        let amp = C64::new((power / (4.0 * PI)).sqrt(), 0.0);
        Self::from_fn(grid, |_| [amp, ZERO])
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Jones] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Jones] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Jones> {
        self.values
    }

    pub fn same_grid(&self, other: &FarFieldPattern) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn check_grid(&self, other: &FarFieldPattern) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Interleaved `[theta_0, phi_0, theta_1, phi_1, ...]` column vector.
    pub fn to_vector(&self) -> CVector {
        CVector::from_iterator(
            2 * self.values.len(),
            self.values.iter().flat_map(|v| [v[0], v[1]]),
        )
    }

    pub fn from_vector(grid: Arc<DirectionGrid>, v: &CVector) -> Result<Self> {
        if v.len() != 2 * grid.len() {
            return Err(Error::DimensionMismatch {
                context: "pattern vector",
                expected: 2 * grid.len(),
                found: v.len(),
            });
        }
        let values = (0..grid.len()).map(|i| [v[2 * i], v[2 * i + 1]]).collect();
        Ok(FarFieldPattern { grid, values })
    }

    /// Column `col` of a `2K x n` kernel matrix as a pattern.
    pub fn from_column(grid: Arc<DirectionGrid>, m: &CMatrix, col: usize) -> Result<Self> {
        Self::from_vector(grid, &m.column(col).into_owned())
    }

    /// Discrete L2 inner product: linear in `self`, conjugate-linear in `other`.
    pub fn inner_product(&self, other: &FarFieldPattern) -> Result<C64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((p, q), &w)| (p[0] * q[0].conj() + p[1] * q[1].conj()) * w)
            .sum())
    }

    /// Power carried by the pattern, W.
    pub fn total_power(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(p, &w)| (p[0].norm_sqr() + p[1].norm_sqr()) * w)
            .sum()
    }

    /// Bilinearly interpolated sample at an arbitrary direction.
    pub fn value_at(&self, d: Direction) -> Jones {
        if let Some(i) = self.grid.find(d) {
            return self.values[i];
        }
        let mut out = [ZERO; 2];
        for (i, w) in self.grid.stencil(d) {
            if w != 0.0 {
                out[0] += self.values[i][0] * w;
                out[1] += self.values[i][1] * w;
            }
        }
        out
    }

    /// Radiation intensity at `d`, W/sr.
    pub fn intensity(&self, d: Direction) -> f64 {
        let v = self.value_at(d);
        v[0].norm_sqr() + v[1].norm_sqr()
    }

    /// `-diag(1, -1)` applied to the pattern read at the antipodal direction.
    pub fn antipodal_mirror(&self) -> Result<FarFieldPattern> {
        if !self.grid.is_antipodally_closed() {
            return Err(Error::NotAntipodallyClosed);
        }
        let values = (0..self.grid.len())
            .map(|i| {
                let v = self.values[self.grid.antipode_index(i)];
                [-v[0], v[1]]
            })
            .collect();
        Ok(FarFieldPattern {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scaled(&self, c: C64) -> FarFieldPattern {
        FarFieldPattern {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| [v[0] * c, v[1] * c]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &FarFieldPattern) -> Result<()> {
        self.check_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a[0] += b[0];
            a[1] += b[1];
        }
        Ok(())
    }

    pub fn conj(&self) -> FarFieldPattern {
        FarFieldPattern {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| [v[0].conj(), v[1].conj()]).collect(),
        }
    }

    /// Largest pointwise difference (C^2 norm) between two patterns.
    pub fn max_deviation(&self, other: &FarFieldPattern) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt())
            .fold(0.0, f64::max))
    }

    /// The pattern of the same source after a rigid rotation.
    ///
    /// Each output sample reads the input at the pre-image direction and
    /// re-projects the transverse field onto the local basis.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> FarFieldPattern {
        FarFieldPattern::from_fn(self.grid.clone(), |d| {
            rotate_sample(rotation, d, |src| self.value_at(src))
        })
    }

    /// CSV with header
    /// `theta_deg,phi_deg,re_a_theta,im_a_theta,re_a_phi,im_a_phi,intensity_W_per_sr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "theta_deg,phi_deg,re_a_theta,im_a_theta,re_a_phi,im_a_phi,intensity_W_per_sr\n",
        );
        for (d, v) in self.grid.directions().iter().zip(&self.values) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(d.theta_deg()),
                fmt_f64(d.phi_deg()),
                fmt_f64(v[0].re),
                fmt_f64(v[0].im),
                fmt_f64(v[1].re),
                fmt_f64(v[1].im),
                fmt_f64(v[0].norm_sqr() + v[1].norm_sqr()),
            );
        }
        out
    }
}

/// Value at `d` of a rotated transverse field, given a reader for the
/// unrotated field.
pub(crate) fn rotate_sample(
    rotation: &Rotation3<f64>,
    d: Direction,
    read: impl Fn(Direction) -> Jones,
) -> Jones {
    let src_dir = Direction::from_unit_vector(&(rotation.inverse() * d.unit_vector()));
    let v = read(src_dir);
    let th = rotation * src_dir.theta_hat();
    let ph = rotation * src_dir.phi_hat();
    let (out_th, out_ph) = (d.theta_hat(), d.phi_hat());
    let m = [
        [th.dot(&out_th), ph.dot(&out_th)],
        [th.dot(&out_ph), ph.dot(&out_ph)],
    ];
    [
        v[0] * m[0][0] + v[1] * m[0][1],
        v[0] * m[1][0] + v[1] * m[1][1],
    ]
}

/// Projects a 3-vector (complex amplitudes) onto the local (theta, phi) basis.
pub fn project_transverse(d: Direction, v: &Vector3<f64>) -> [f64; 2] {
    [v.dot(&d.theta_hat()), v.dot(&d.phi_hat())]
}
