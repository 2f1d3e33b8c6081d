//! Power, gain and efficiency metrics and noise propagation.

use std::f64::consts::PI;

use super::{solve_direct, GainOperators, Inputs, RemsModel, SolveState};
use crate::farfield::{Direction, FarFieldPattern};
use crate::linalg;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Net powers accepted by the tuning network, the radiating structure and
/// radiated into the far field, in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMetrics {
    pub p_t: f64,
    pub p_r: f64,
    pub p_f: f64,
}

pub fn power_metrics(state: &SolveState) -> PowerMetrics {
    PowerMetrics {
        p_t: linalg::vec_norm_sqr(&state.a_t) - linalg::vec_norm_sqr(&state.b_t),
        p_r: linalg::vec_norm_sqr(&state.a_r) - linalg::vec_norm_sqr(&state.b_r),
        p_f: state.a_f.total_power() - state.b_f.total_power(),
    }
}

/// Available power of the PAs: `v^H Re(Z_Tx)^-1 v / 4`.
pub fn available_power(v_tx: &CVector, z_tx: &[C64]) -> Result<f64> {
    if v_tx.len() != z_tx.len() {
        return Err(Error::DimensionMismatch {
            context: "PA voltages vs impedances",
            expected: z_tx.len(),
            found: v_tx.len(),
        });
    }
    let mut p = 0.0;
    for (v, z) in v_tx.iter().zip(z_tx) {
        if !(z.re > 0.0) {
            return Err(Error::invalid(format!("PA impedance {z} needs a positive real part")));
        }
        p += v.norm_sqr() / z.re;
    }
    Ok(p / 4.0)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// REMS gain `4 pi I(d) / P_A` for PA drive `v_tx`, with noise and incoming
/// fields switched off.
pub fn rems_gain(model: &RemsModel, v_tx: &CVector, d: Direction) -> Result<f64> {
    let ops = model.build_gain_operators()?;
    rems_gain_with(&ops, model.frontend().z_tx(), v_tx, d)
}

/// [`rems_gain`] with prebuilt operators.
pub fn rems_gain_with(ops: &GainOperators, z_tx: &[C64], v_tx: &CVector, d: Direction) -> Result<f64> {
    let p_a = available_power(v_tx, z_tx)?;
    if !(p_a > 0.0) {
        return Err(Error::invalid("REMS gain needs a nonzero PA drive"));
    }
    let a = ops.vtx_af_at(d) * v_tx;
    Ok(4.0 * PI * linalg::vec_norm_sqr(&a) / p_a)
}

/// Stage efficiencies of a transmitting REMS.
#[derive(Debug, Clone)]
pub struct Efficiencies {
    pub p_a: f64,
    pub powers: PowerMetrics,
    pub eta_matching: f64,
    pub eta_tuning: f64,
    pub eta_radiating: f64,
    a_f: FarFieldPattern,
}

impl Efficiencies {
    /// Directivity `4 pi I(d) / P_F`.
    pub fn directivity(&self, d: Direction) -> f64 {
        4.0 * PI * self.a_f.intensity(d) / self.powers.p_f
    }

    pub fn pattern(&self) -> &FarFieldPattern {
        &self.a_f
    }

    /// Product of the three efficiencies and the directivity.
    pub fn chain_gain(&self, d: Direction) -> f64 {
        self.eta_matching * self.eta_tuning * self.eta_radiating * self.directivity(d)
    }
}

pub fn efficiencies(model: &RemsModel, v_tx: &CVector) -> Result<Efficiencies> {
    let p_a = available_power(v_tx, model.frontend().z_tx())?;
    let state = solve_direct(model, &Inputs::transmit(model, v_tx.clone()))?;
    let powers = power_metrics(&state);
    // Stage input powers below this fraction of P_A count as zero.
    let floor = 1e-15 * p_a;
    let ratio = |num: f64, den: f64, stage: &'static str| {
        if den > floor && den > 0.0 {
            Ok(num / den)
        } else {
            Err(Error::UndefinedStage(stage))
        }
    };
    Ok(Efficiencies {
        p_a,
        powers,
        eta_matching: ratio(powers.p_t, p_a, "matching")?,
        eta_tuning: ratio(powers.p_r, powers.p_t, "tuning")?,
        eta_radiating: ratio(powers.p_f, powers.p_r, "radiating")?,
        a_f: state.a_f,
    })
}

/// Second-order statistics of the receiver noise sources.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    /// `E[v_G v_G^H]`, `N_Rx x N_Rx`.
    pub v_gamma: CMatrix,
    /// `E[i_G i_G^H]`, `N_Rx x N_Rx`.
    pub i_gamma: CMatrix,
    /// `E[v_U v_U^H]`, `M x M`.
    pub v_upsilon: CMatrix,
    /// `E[v_G i_G^H]`, `N_Rx x N_Rx`.
    pub cross: Option<CMatrix>,
}

impl NoiseCovariance {
    pub fn zeros(n_rx: usize, m: usize) -> Self {
        NoiseCovariance {
            v_gamma: CMatrix::zeros(n_rx, n_rx),
            i_gamma: CMatrix::zeros(n_rx, n_rx),
            v_upsilon: CMatrix::zeros(m, m),
            cross: None,
        }
    }
}

/// Covariance of the LNA voltages caused by the noise sources.
pub fn noise_covariance(ops: &GainOperators, cov: &NoiseCovariance) -> Result<CMatrix> {
    let n_rx = ops.n_rx();
    let m = ops.radiating().m_ports();
    for (context, c, n) in [
        ("v_gamma covariance", &cov.v_gamma, n_rx),
        ("i_gamma covariance", &cov.i_gamma, n_rx),
        ("v_upsilon covariance", &cov.v_upsilon, m),
    ] {
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                found: c.nrows(),
            });
        }
    }
    let tol = 1e-12;
    let cross = cov.cross.clone().unwrap_or_else(|| CMatrix::zeros(n_rx, n_rx));
    if cross.shape() != (n_rx, n_rx) {
        return Err(Error::DimensionMismatch {
            context: "cross covariance",
            expected: n_rx,
            found: cross.nrows(),
        });
    }
    let mut joint = CMatrix::zeros(2 * n_rx, 2 * n_rx);
    linalg::set_block(&mut joint, 0, 0, &cov.v_gamma);
    linalg::set_block(&mut joint, 0, n_rx, &cross);
    linalg::set_block(&mut joint, n_rx, 0, &cross.adjoint());
    linalg::set_block(&mut joint, n_rx, n_rx, &cov.i_gamma);
    if !linalg::is_hermitian_psd(&joint, tol) {
        return Err(Error::invalid("LNA noise covariance is not Hermitian positive semidefinite"));
    }
    if !linalg::is_hermitian_psd(&cov.v_upsilon, tol) {
        return Err(Error::invalid("extrinsic noise covariance is not Hermitian positive semidefinite"));
    }
    let gv = ops.g_vgamma_vrx();
    let gi = ops.g_igamma_vrx();
    let gu = ops.g_vupsilon_vrx();
    let cross_term = gv * &cross * gi.adjoint();
    let out = gv * &cov.v_gamma * gv.adjoint()
        + gi * &cov.i_gamma * gi.adjoint()
        + gu * &cov.v_upsilon * gu.adjoint()
        + &cross_term
        + cross_term.adjoint();
    Ok((&out + out.adjoint()) * C64::new(0.5, 0.0))
}
