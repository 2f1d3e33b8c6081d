//! Seeded random models and the synthetic reflector antenna used by tests,
//! benchmarks and the example scenes.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::constants::wavelength;
use crate::farfield::{Direction, DirectionGrid, FarFieldPattern};
use crate::network::{ReconfigurableNetwork, RfFrontend, TuningNetwork};
use crate::radiating::{dipole_array, ArrayModel, DipoleElement, RadiatingStructure};
use crate::solver::{Inputs, RemsModel};
use crate::{CMatrix, CVector, Result, C64};

/// Standard complex Gaussian sample.
pub fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    // Box-Muller.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    C64::from_polar(r, 2.0 * PI * u2)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Haar-ish random unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    random_matrix(rng, n, n).qr().q()
}

/// Random `n x n` matrix with singular values drawn uniformly from
/// `[0, scale]`. With `symmetric` the result is complex symmetric
/// (`U D U^T`), as for a reciprocal network.
pub fn random_passive_matrix(
    rng: &mut ChaCha8Rng,
    n: usize,
    scale: f64,
    symmetric: bool,
) -> CMatrix {
    let u = random_unitary(rng, n);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
        C64::new(scale * rng.random::<f64>(), 0.0)
    }));
    let v = if symmetric {
        u.transpose()
    } else {
        random_unitary(rng, n).adjoint()
    };
    &u * d * v
}

pub fn random_tuning_network(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    scale: f64,
    symmetric: bool,
) -> Result<TuningNetwork> {
    TuningNetwork::new(random_passive_matrix(rng, n + m, scale, symmetric), n)
}

/// Frontend with impedances `R + jX`, `R` in `[10, 150]` and `X` in
/// `[-80, 80]` ohms.
pub fn random_frontend(rng: &mut ChaCha8Rng, n_tx: usize, n_rx: usize, r0: f64) -> Result<RfFrontend> {
    let mut z = || C64::new(10.0 + 140.0 * rng.random::<f64>(), -80.0 + 160.0 * rng.random::<f64>());
    let z_tx = (0..n_tx).map(|_| z()).collect();
    let z_rx = (0..n_rx).map(|_| z()).collect();
    RfFrontend::new(z_tx, z_rx, r0)
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// `m` randomly oriented dipoles within half a wavelength of the origin.
pub fn random_dipoles(rng: &mut ChaCha8Rng, m: usize, frequency: f64) -> Vec<DipoleElement> {
    let lambda = wavelength(frequency);
    (0..m)
        .map(|_| {
            let o = random_unit_vector(rng);
            let p = random_unit_vector(rng) * (0.5 * lambda * rng.random::<f64>());
            DipoleElement::new(o, p)
        })
        .collect()
}

/// Random reciprocal, passive structure: a lossless dipole array behind a
/// matched attenuator of amplitude transmission `alpha` on every port.
pub fn random_radiating_structure(
    rng: &mut ChaCha8Rng,
    grid: Arc<DirectionGrid>,
    frequency: f64,
    m: usize,
    alpha: f64,
) -> Result<RadiatingStructure> {
    let elements = random_dipoles(rng, m, frequency);
    let s = dipole_array(&elements, grid, frequency, ArrayModel::Lossless)?;
    attenuate(s, alpha)
}

/// Cascades every port of `s` with a matched attenuator `[[0, alpha], [alpha, 0]]`.
pub fn attenuate(s: RadiatingStructure, alpha: f64) -> Result<RadiatingStructure> {
    let a = C64::new(alpha, 0.0);
    let coupling = s.coupling() * (a * a);
    let tx = s.tx_kernel() * a;
    let rx = s.rx_kernel() * a;
    let noise = s.extrinsic_noise_enabled();
    RadiatingStructure::new(
        s.grid().clone(),
        s.frequency(),
        coupling,
        tx,
        rx,
        s.scatter_kernel().clone(),
    )
    .map(|r| r.with_extrinsic_noise(noise))
}

/// Random passive end-to-end model.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    grid: Arc<DirectionGrid>,
    frequency: f64,
    n_tx: usize,
    n_rx: usize,
    m: usize,
) -> Result<RemsModel> {
    let r0 = 50.0;
    let frontend = random_frontend(rng, n_tx, n_rx, r0)?;
    let tuning = random_tuning_network(rng, n_tx + n_rx, m, 0.95, true)?;
    let alpha = 0.7 + 0.3 * rng.random::<f64>();
    let radiating = random_radiating_structure(rng, grid, frequency, m, alpha)?;
    RemsModel::new(frontend, tuning, Arc::new(radiating))
}

/// Random complex vector with standard Gaussian entries.
pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}

/// Random pattern with Gaussian samples of unit variance.
pub fn random_pattern(rng: &mut ChaCha8Rng, grid: Arc<DirectionGrid>) -> FarFieldPattern {
    FarFieldPattern::from_fn(grid, |_| [complex_normal(rng), complex_normal(rng)])
}

/// Every source of the model drawn at random. `noise` controls whether the
/// LNA and extrinsic noise sources are nonzero.
pub fn random_inputs(rng: &mut ChaCha8Rng, model: &RemsModel, noise: bool) -> Inputs {
    let mut inputs = Inputs::zeros(model);
    inputs.v_tx = random_vector(rng, model.n_tx());
    inputs.b_f = random_pattern(rng, model.grid().clone());
    if noise {
        inputs.v_gamma = random_vector(rng, model.n_rx());
        inputs.i_gamma = random_vector(rng, model.n_rx()) * C64::new(0.02, 0.0);
        inputs.v_upsilon = random_vector(rng, model.m());
    }
    inputs
}

/// Desk-scale reconfigurable reflector antenna: `n_feeds` x-directed feed
/// dipoles in front of a square array of x-directed reflector dipoles in the
/// `z = 0` plane, all coupled through the lossless array model. The
/// reflector dipoles are loaded by the reconfigurable impedances.
#[derive(Debug, Clone)]
pub struct SyntheticRra {
    pub radiating: Arc<RadiatingStructure>,
    pub network: ReconfigurableNetwork,
    pub frontend: RfFrontend,
}

impl SyntheticRra {
    pub fn n_feeds(&self) -> usize {
        self.network.n()
    }

    pub fn n_reflectors(&self) -> usize {
        self.network.r()
    }

    pub fn model(&self, z_indices: &[usize]) -> Result<RemsModel> {
        let tuning = self.network.reduce_indices(z_indices)?;
        RemsModel::new(self.frontend.clone(), tuning, self.radiating.clone())
    }
}

/// Case-study impedance set: 32 values `1.2 + jX`, `X` uniform in `[-196, -14]` ohms.
pub fn case_study_z_set() -> Vec<C64> {
    (0..32)
        .map(|i| C64::new(1.2, -196.0 + 182.0 * i as f64 / 31.0))
        .collect()
}

/// Case-study regularization schedule `20 * 0.5^i`, `i = 0..10`.
pub fn case_study_sigma_schedule() -> Vec<f64> {
    (0..10).map(|i| 20.0 * 0.5f64.powi(i)).collect()
}

/// Case-study co-polarization estimate `(cos phi, -sin phi)`.
pub fn case_study_q_co(d: Direction) -> [C64; 2] {
    [C64::new(d.phi.cos(), 0.0), C64::new(-d.phi.sin(), 0.0)]
}

pub fn synthetic_rra(
    grid: Arc<DirectionGrid>,
    frequency: f64,
    side: usize,
    n_feeds: usize,
    r0: f64,
    z_set: Vec<C64>,
) -> Result<SyntheticRra> {
    let lambda = wavelength(frequency);
    let x = Vector3::x();
    let mut elements = Vec::new();
    let feed_height = 0.6 * lambda;
    for f in 0..n_feeds {
        let y = (f as f64 - (n_feeds as f64 - 1.0) / 2.0) * 0.5 * lambda;
        elements.push(DipoleElement::new(x, Vector3::new(0.0, y, feed_height)));
    }
    let pitch = 0.5 * lambda;
    let off = (side as f64 - 1.0) / 2.0;
    for i in 0..side {
        for j in 0..side {
            let p = Vector3::new((i as f64 - off) * pitch, (j as f64 - off) * pitch, 0.0);
            elements.push(DipoleElement::new(x, p));
        }
    }
    let radiating = dipole_array(&elements, grid, frequency, ArrayModel::Lossless)?;
    let network = ReconfigurableNetwork::direct(n_feeds, n_feeds + side * side, r0, z_set)?;
    let frontend = RfFrontend::matched(n_feeds, 0, r0)?;
    Ok(SyntheticRra {
        radiating: Arc::new(radiating),
        network,
        frontend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;

    #[test]
    fn passive_matrices_respect_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let s = random_passive_matrix(&mut rng, n, 0.8, true);
            assert!(linalg::sigma_max(&s) <= 0.8 + 1e-12);
            assert!(linalg::max_abs(&(&s - s.transpose())) < 1e-14);
            let s = random_passive_matrix(&mut rng, n, 1.0, false);
            assert!(linalg::sigma_max(&s) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn attenuated_structure_stays_passive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = DirectionGrid::latlon(10, 20).unwrap().shared();
        let s = random_radiating_structure(&mut rng, grid, 5.4e9, 3, 0.8).unwrap();
        assert!(s.passivity_sigma() <= 1.0 + 1e-9);
        assert!(s.check_reciprocity(1e-10).all_ok());
    }

    #[test]
    fn case_study_constants() {
        let z = case_study_z_set();
        assert_eq!(z.len(), 32);
        assert_eq!(z[0], C64::new(1.2, -196.0));
        assert!((z[31].im + 14.0).abs() < 1e-12);
        let s = case_study_sigma_schedule();
        assert_eq!(s[0], 20.0);
        assert!((s[9] - 20.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn rra_reduces_to_valid_models() {
        let grid = DirectionGrid::latlon(10, 20).unwrap().shared();
        let rra = synthetic_rra(grid, 5.4e9, 2, 2, 50.0, case_study_z_set()).unwrap();
        assert_eq!(rra.n_reflectors(), 4);
        let model = rra.model(&[0, 5, 10, 31]).unwrap();
        assert_eq!(model.tuning().n(), 2);
        assert_eq!(model.tuning().m(), 6);
    }
}
