//! Far-field channels between radiating structures.
//!
//! Both structures must already be expressed in one common frame (see
//! [`RadiatingStructure::rotated`]). Kernels are evaluated at single
//! directions by grid interpolation; only the reduced scattering kernels
//! enter, since the free-space mirror term describes the unscattered
//! through-path.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::constants::{wavelength, CONDITION_LIMIT};
use crate::farfield::{fmt_f64, Direction};
use crate::linalg;
use crate::radiating::RadiatingStructure;
use crate::{CMatrix, Error, Result, C64};

/// Distances below this many wavelengths trigger a far-field warning.
pub const NEAR_FIELD_WAVELENGTHS: f64 = 10.0;

/// Relative position of a second structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    distance: f64,
    direction: Vector3<f64>,
}

impl Placement {
    /// `direction` points from the first structure's center to the second's.
    pub fn new(distance: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::invalid(format!("distance must be positive, got {distance}")));
        }
        let n = direction.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("direction must be a unit vector, norm is {n}")));
        }
        Ok(Placement {
            distance,
            direction: direction / n,
        })
    }

    pub fn towards(distance: f64, d: Direction) -> Result<Self> {
        Self::new(distance, d.unit_vector())
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn direction(&self) -> Direction {
        Direction::from_unit_vector(&self.direction)
    }

    /// The same link seen from the other end.
    pub fn reversed(&self) -> Placement {
        Placement {
            distance: self.distance,
            direction: -self.direction,
        }
    }
}

/// Transmission coefficients from every port of one structure to every port
/// of another.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// `M2 x M1`.
    pub s21: CMatrix,
    /// Separation in wavelengths.
    pub distance_wavelengths: f64,
}

/// Free-space propagation block `(2 pi / jk) (e^{-jkd} / d) diag(1, -1)`.
pub fn propagation_matrix_c(d: f64, k: f64) -> CMatrix {
    let c = C64::from_polar(1.0, -k * d) * (2.0 * PI / (k * d)) / C64::new(0.0, 1.0);
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = c;
    m[(1, 1)] = -c;
    m
}

fn block_matrix(b: [[C64; 2]; 2]) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| b[r][c])
}

fn check_frequencies(a: &RadiatingStructure, b: &RadiatingStructure) -> Result<()> {
    let (fa, fb) = (a.frequency(), b.frequency());
    if (fa - fb).abs() > 1e-12 * fa.max(fb) {
        return Err(Error::invalid(format!(
            "structures operate at different frequencies ({fa} Hz vs {fb} Hz)"
        )));
    }
    Ok(())
}

fn distance_in_wavelengths(d: f64, frequency: f64) -> f64 {
    let dl = d / wavelength(frequency);
    if dl < NEAR_FIELD_WAVELENGTHS {
        log::warn!("separation of {dl:.2} wavelengths is short for a far-field channel model");
    }
    dl
}

/// Channel from `r1` to `r2`, with `r2` placed at `p` relative to `r1`.
pub fn far_channel(
    r1: &RadiatingStructure,
    r2: &RadiatingStructure,
    p: &Placement,
) -> Result<ChannelMatrix> {
    check_frequencies(r1, r2)?;
    let k = r1.wavenumber();
    let dl = distance_in_wavelengths(p.distance, r1.frequency());
    let d = p.direction();
    let back = d.antipode();
    let c = propagation_matrix_c(p.distance, k);
    let tx = r1.tx_at(d);
    let rx = r2.rx_at(back);
    let s1 = block_matrix(r1.scatter_at(d, d));
    let s2 = block_matrix(r2.scatter_at(back, back));
    let bounce = &s1 * &c * &s2 * &c;
    let lhs = linalg::identity(2) - bounce;
    let cond = linalg::condition_number(&lhs);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            context: "multiple-bounce term I - M".into(),
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    let inner = lhs
        .lu()
        .solve(&tx)
        .ok_or_else(|| Error::IllConditioned {
            context: "multiple-bounce term I - M".into(),
            cond: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;
    Ok(ChannelMatrix {
        s21: rx.transpose() * c * inner,
        distance_wavelengths: dl,
    })
}

/// Multi-hop channel under the unilateral approximation: every stage only
/// feeds the next one. `legs[i]` places node `i + 1` relative to node `i`,
/// where node 0 is `tx`, the last node is `rx` and the scatterers sit in
/// between. Returns `M_rx x M_tx` coefficients.
pub fn cascade_unilateral(
    tx: &RadiatingStructure,
    scatterers: &[&RadiatingStructure],
    rx: &RadiatingStructure,
    legs: &[Placement],
) -> Result<CMatrix> {
    if scatterers.is_empty() {
        return Err(Error::invalid("a cascade needs at least one intermediate scatterer"));
    }
    if legs.len() != scatterers.len() + 1 {
        return Err(Error::DimensionMismatch {
            context: "cascade legs",
            expected: scatterers.len() + 1,
            found: legs.len(),
        });
    }
    for s in scatterers.iter().copied().chain(std::iter::once(rx)) {
        check_frequencies(tx, s)?;
    }
    let k = tx.wavenumber();
    for leg in legs {
        distance_in_wavelengths(leg.distance, tx.frequency());
    }
    let mut acc = tx.tx_at(legs[0].direction());
    for (i, s) in scatterers.iter().enumerate() {
        let arriving_from = legs[i].direction().antipode();
        let leaving = legs[i + 1].direction();
        let c = propagation_matrix_c(legs[i].distance, k);
        acc = block_matrix(s.scatter_at(leaving, arriving_from)) * c * acc;
    }
    let last = legs[legs.len() - 1];
    let c = propagation_matrix_c(last.distance, k);
    Ok(rx.rx_at(last.direction().antipode()).transpose() * c * acc)
}

/// Sweep output `<column>,re_s,im_s`, e.g. `alpha_deg,re_s,im_s`.
pub fn sweep_csv(column: &str, rows: &[(f64, C64)]) -> String {
    let mut out = format!("{column},re_s,im_s\n");
    for (a, s) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*a), fmt_f64(s.re), fmt_f64(s.im));
    }
    out
}
