//! Analytic radiating structures.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;

use super::{RadiatingStructure, ScatterKernel};
use crate::constants::wavenumber;
use crate::farfield::{Direction, DirectionGrid, Jones};
use crate::linalg;
use crate::{CMatrix, Error, Result, C64};

/// One short dipole: unit orientation and position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleElement {
    pub orientation: Vector3<f64>,
    pub position: Vector3<f64>,
}

impl DipoleElement {
    pub fn new(orientation: Vector3<f64>, position: Vector3<f64>) -> Self {
        DipoleElement {
            orientation,
            position,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.orientation.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "dipole orientation must be a unit vector, norm is {n}"
            )));
        }
        if !self.position.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("dipole position must be finite"));
        }
        Ok(())
    }
}

/// How the elements of a dipole array interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrayModel {
    /// Uncoupled, minimal-scattering elements: zero coupling, zero reduced
    /// scattering kernel, receive kernel equal to the transmit kernel.
    #[default]
    Idealized,
    /// Energy-conserving coupled array derived from the element patterns.
    /// The sampled operator is unitary on the grid.
    Lossless,
}

/// Normalized short-dipole far-field sample: 1 W radiated at unit drive.
pub fn dipole_sample(d: Direction, element: &DipoleElement, k: f64) -> Jones {
    let amp = (3.0 / (8.0 * PI)).sqrt();
    let o = &element.orientation;
    let phase = C64::from_polar(1.0, k * d.unit_vector().dot(&element.position));
    [
        phase * (amp * o.dot(&d.theta_hat())),
        phase * (amp * o.dot(&d.phi_hat())),
    ]
}

fn raw_patterns(
    elements: &[DipoleElement],
    grid: &DirectionGrid,
    frequency: f64,
) -> Result<CMatrix> {
    if elements.is_empty() {
        return Err(Error::invalid("dipole array needs at least one element"));
    }
    for e in elements {
        e.validate()?;
    }
    let k = wavenumber(frequency);
    let mut f = CMatrix::zeros(2 * grid.len(), elements.len());
    for (i, &d) in grid.directions().iter().enumerate() {
        for (m, e) in elements.iter().enumerate() {
            let v = dipole_sample(d, e, k);
            f[(2 * i, m)] = v[0];
            f[(2 * i + 1, m)] = v[1];
        }
    }
    Ok(f)
}

/// A single matched short dipole (idealized, non-scattering).
pub fn hertzian_dipole(
    orientation: Vector3<f64>,
    position: Vector3<f64>,
    grid: Arc<DirectionGrid>,
    frequency: f64,
) -> Result<RadiatingStructure> {
    dipole_array(
        &[DipoleElement::new(orientation, position)],
        grid,
        frequency,
        ArrayModel::Idealized,
    )
}

/// An array of short dipoles.
pub fn dipole_array(
    elements: &[DipoleElement],
    grid: Arc<DirectionGrid>,
    frequency: f64,
    model: ArrayModel,
) -> Result<RadiatingStructure> {
    let f = raw_patterns(elements, &grid, frequency)?;
    match model {
        ArrayModel::Idealized => {
            let m = elements.len();
            RadiatingStructure::new(
                grid,
                frequency,
                CMatrix::zeros(m, m),
                f.clone(),
                f,
                ScatterKernel::Zero,
            )
        }
        ArrayModel::Lossless => lossless_from_patterns(f, grid, frequency),
    }
}

/// Builds a lossless, reciprocal structure whose radiated fields are linear
/// combinations of the given open-port patterns.
///
/// With `F` the `2K x M` pattern matrix and `G = F^H W F` its Gram matrix on
/// the grid, the structure has
///
/// ```text
/// S_RR = (G - I)(G + I)^-1
/// T    = 2 F (G + I)^-1
/// X    = 2 F G^-1 (G + I)^-1 F^T
/// ```
///
/// The patterns must satisfy `F = -mirror(conj(F))` (true for any real
/// combination of point-source patterns) and have a real Gram matrix.
pub fn lossless_from_patterns(
    f: CMatrix,
    grid: Arc<DirectionGrid>,
    frequency: f64,
) -> Result<RadiatingStructure> {
    let m = f.ncols();
    if f.nrows() != 2 * grid.len() {
        return Err(Error::DimensionMismatch {
            context: "pattern matrix",
            expected: 2 * grid.len(),
            found: f.nrows(),
        });
    }
    let w = grid.component_weights();
    let mut wf = f.clone();
    for (r, mut row) in wf.row_iter_mut().enumerate() {
        row *= C64::new(w[r], 0.0);
    }
    let gram = f.adjoint() * wf;
    let imag = gram.map(|z| C64::new(0.0, z.im));
    let scale = linalg::max_abs(&gram).max(1e-300);
    if linalg::max_abs(&imag) > 1e-8 * scale {
        log::warn!(
            "pattern Gram matrix has a non-negligible imaginary part ({:.3e})",
            linalg::max_abs(&imag)
        );
    }
    // Symmetrized real part.
    let g = gram.map(|z| C64::new(z.re, 0.0));
    let g = (&g + g.transpose()) * C64::new(0.5, 0.0);
    let eye = linalg::identity(m);
    let gpi = linalg::checked_inverse(&(&g + &eye), "lossless array G + I")?;
    let gi = linalg::checked_inverse(&g, "lossless array Gram matrix")?;
    let coupling = (&g - &eye) * &gpi;
    let coupling = (&coupling + coupling.transpose()) * C64::new(0.5, 0.0);
    let t = &f * &gpi * C64::new(2.0, 0.0);
    let core = &gi * &gpi * C64::new(2.0, 0.0);
    let core = (&core + core.transpose()) * C64::new(0.5, 0.0);
    RadiatingStructure::new(
        grid,
        frequency,
        coupling,
        t.clone(),
        t,
        ScatterKernel::LowRank {
            left: f.clone(),
            core,
            right: f,
        },
    )
}

/// Ideal isotropic, theta-polarized, matched radiator (1 W at unit drive).
pub fn isotropic_radiator(grid: Arc<DirectionGrid>, frequency: f64) -> Result<RadiatingStructure> {
    let amp = C64::new((1.0 / (4.0 * PI)).sqrt(), 0.0);
    let mut k = CMatrix::zeros(2 * grid.len(), 1);
    for i in 0..grid.len() {
        k[(2 * i, 0)] = amp;
    }
    RadiatingStructure::new(
        grid,
        frequency,
        CMatrix::zeros(1, 1),
        k.clone(),
        k,
        ScatterKernel::Zero,
    )
}
