//! Numerical modeling of reconfigurable electromagnetic structures (REMSs).
//!
//! A REMS is split into three linear submodels: an RF frontend (power
//! amplifiers and low-noise amplifiers), a tuning network (fixed and
//! reconfigurable non-radiating multiports) and a radiating structure that
//! couples circuit ports to the far field. Far-field quantities are sampled
//! on a [`farfield::DirectionGrid`] and carried as power-wave patterns whose
//! squared norm is radiation intensity.
//!
//! Module map:
//!
//! - [`farfield`]: direction grids, quadrature weights, far-field patterns.
//! - [`radiating`]: the radiating-structure operator, kernel extraction from
//!   plane-wave responses, reciprocity checks, analytic dipole library.
//! - [`network`]: tuning-network scattering algebra, RF frontend blocks,
//!   Touchstone import/export.
//! - [`solver`]: end-to-end gain operators, the direct linear-system oracle,
//!   power, gain and efficiency metrics, noise propagation.
//! - [`channel`]: far-field channel between two structures and unilateral
//!   multi-hop cascades.
//! - [`beamform`]: joint impedance tuning and zero-forcing precoding.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod channel;
pub mod constants;
mod error;
pub mod farfield;
pub mod linalg;
pub mod network;
pub mod radiating;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};

/// Complex double.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub use farfield::{Direction, DirectionGrid, FarFieldPattern};
pub use network::{RfFrontend, TuningNetwork};
pub use radiating::RadiatingStructure;
pub use solver::{GainOperators, RemsModel};
