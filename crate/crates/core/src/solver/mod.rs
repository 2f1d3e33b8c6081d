//! End-to-end REMS model: gain operators, the direct linear-system solve and
//! power metrics.
//!
//! Interface waves follow the signal-flow graph of the model:
//!
//! ```text
//! [b_T; a_R] = S_T [a_T; b_R]                  tuning network
//! a_R~ = a_R + v_U / (2 sqrt(R0))              extrinsic noise
//! b_R  = b_R~ - v_U / (2 sqrt(R0))
//! [b_R~; a_F] = S_R [a_R~; b_F]                radiating structure
//! a_T = S_RF b_T + K_vTx v_Tx + K_iG i_G + K_vG v_G
//! v_Rx = K_vRx (b_T - a_T) + Z_Rx i_G          PAs and LNAs
//! ```

mod gain;
mod metrics;
#[cfg(test)]
mod tests;

use std::sync::Arc;

use crate::constants::CONDITION_LIMIT;
use crate::farfield::{DirectionGrid, FarFieldPattern};
use crate::linalg;
use crate::network::{RfFrontend, TuningNetwork};
use crate::radiating::RadiatingStructure;
use crate::{CMatrix, CVector, Error, Result, C64};

pub use gain::{GainOperators, Outputs};
pub use metrics::{
    available_power, efficiencies, noise_covariance, power_metrics, rems_gain, rems_gain_with,
    to_db, Efficiencies, NoiseCovariance, PowerMetrics,
};

/// RF frontend, tuning network and radiating structure of one REMS.
#[derive(Debug, Clone)]
pub struct RemsModel {
    frontend: RfFrontend,
    tuning: TuningNetwork,
    radiating: Arc<RadiatingStructure>,
}

impl RemsModel {
    pub fn new(
        frontend: RfFrontend,
        tuning: TuningNetwork,
        radiating: Arc<RadiatingStructure>,
    ) -> Result<Self> {
        if frontend.n() != tuning.n() {
            return Err(Error::DimensionMismatch {
                context: "frontend ports vs tuning network",
                expected: tuning.n(),
                found: frontend.n(),
            });
        }
        if radiating.m_ports() != tuning.m() {
            return Err(Error::DimensionMismatch {
                context: "radiating ports vs tuning network",
                expected: tuning.m(),
                found: radiating.m_ports(),
            });
        }
        Ok(RemsModel {
            frontend,
            tuning,
            radiating,
        })
    }

    pub fn frontend(&self) -> &RfFrontend {
        &self.frontend
    }

    pub fn tuning(&self) -> &TuningNetwork {
        &self.tuning
    }

    pub fn radiating(&self) -> &Arc<RadiatingStructure> {
        &self.radiating
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        self.radiating.grid()
    }

    pub fn r0(&self) -> f64 {
        self.frontend.r0()
    }

    pub fn frequency(&self) -> f64 {
        self.radiating.frequency()
    }

    pub fn n_tx(&self) -> usize {
        self.frontend.n_tx()
    }

    pub fn n_rx(&self) -> usize {
        self.frontend.n_rx()
    }

    pub fn n(&self) -> usize {
        self.frontend.n()
    }

    pub fn m(&self) -> usize {
        self.tuning.m()
    }

    pub fn build_gain_operators(&self) -> Result<GainOperators> {
        GainOperators::build(self)
    }
}

/// Signal and noise sources driving a model.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub v_tx: CVector,
    pub v_gamma: CVector,
    pub i_gamma: CVector,
    pub v_upsilon: CVector,
    pub b_f: FarFieldPattern,
}

impl Inputs {
    pub fn zeros(model: &RemsModel) -> Self {
        Inputs {
            v_tx: CVector::zeros(model.n_tx()),
            v_gamma: CVector::zeros(model.n_rx()),
            i_gamma: CVector::zeros(model.n_rx()),
            v_upsilon: CVector::zeros(model.m()),
            b_f: FarFieldPattern::zeros(model.grid().clone()),
        }
    }

    /// PA drive only.
    pub fn transmit(model: &RemsModel, v_tx: CVector) -> Self {
        Inputs {
            v_tx,
            ..Self::zeros(model)
        }
    }

    pub fn check(&self, n_tx: usize, n_rx: usize, m: usize, grid: &DirectionGrid) -> Result<()> {
        for (context, v, n) in [
            ("v_tx", &self.v_tx, n_tx),
            ("v_gamma", &self.v_gamma, n_rx),
            ("i_gamma", &self.i_gamma, n_rx),
            ("v_upsilon", &self.v_upsilon, m),
        ] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if **self.b_f.grid() != *grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Component-wise sum.
    pub fn add(&self, other: &Inputs) -> Result<Inputs> {
        let mut b_f = self.b_f.clone();
        b_f.add_assign(&other.b_f)?;
        Ok(Inputs {
            v_tx: &self.v_tx + &other.v_tx,
            v_gamma: &self.v_gamma + &other.v_gamma,
            i_gamma: &self.i_gamma + &other.i_gamma,
            v_upsilon: &self.v_upsilon + &other.v_upsilon,
            b_f,
        })
    }
}

/// Every interface wave of a solved model.
#[derive(Debug, Clone)]
pub struct SolveState {
    pub a_t: CVector,
    pub b_t: CVector,
    pub a_r: CVector,
    pub b_r: CVector,
    pub a_r_tilde: CVector,
    pub b_r_tilde: CVector,
    pub v_rx: CVector,
    pub a_f: FarFieldPattern,
    pub b_f: FarFieldPattern,
    /// Largest relative residual over the constituent equations.
    pub residual: f64,
}

struct Layout {
    n: usize,
    m: usize,
    n_rx: usize,
}

impl Layout {
    fn a_t(&self) -> usize {
        0
    }
    fn b_t(&self) -> usize {
        self.n
    }
    fn a_r(&self) -> usize {
        2 * self.n
    }
    fn b_r(&self) -> usize {
        2 * self.n + self.m
    }
    fn a_rt(&self) -> usize {
        2 * self.n + 2 * self.m
    }
    fn b_rt(&self) -> usize {
        2 * self.n + 3 * self.m
    }
    fn v_rx(&self) -> usize {
        2 * self.n + 4 * self.m
    }
    fn size(&self) -> usize {
        2 * self.n + 4 * self.m + self.n_rx
    }
}

/// Assembles and solves the complete linear system of the model. This is
/// independent of the closed-form gain operators and serves as their check.
pub fn solve_direct(model: &RemsModel, inputs: &Inputs) -> Result<SolveState> {
    let (n, m, n_rx) = (model.n(), model.m(), model.n_rx());
    inputs.check(model.n_tx(), n_rx, m, model.grid())?;
    let lay = Layout { n, m, n_rx };
    let size = lay.size();
    let eye_n = linalg::identity(n);
    let eye_m = linalg::identity(m);
    let t = &model.tuning;
    let r = &model.radiating;
    let k = model.frontend.assemble_k_matrices();

    let mut a = CMatrix::zeros(size, size);
    let mut rhs = CVector::zeros(size);
    let noise = if r.extrinsic_noise_enabled() {
        &inputs.v_upsilon * C64::new(1.0 / (2.0 * model.r0().sqrt()), 0.0)
    } else {
        CVector::zeros(m)
    };
    let b_f = inputs.b_f.to_vector();

    // Tuning network, frontend-side rows.
    let row = 0;
    linalg::set_block(&mut a, row, lay.b_t(), &eye_n);
    linalg::set_block(&mut a, row, lay.a_t(), &-t.s_tt());
    linalg::set_block(&mut a, row, lay.b_r(), &-t.s_tr());
    // Tuning network, radiating-side rows.
    let row = n;
    linalg::set_block(&mut a, row, lay.a_r(), &eye_m);
    linalg::set_block(&mut a, row, lay.a_t(), &-t.s_rt());
    linalg::set_block(&mut a, row, lay.b_r(), &-t.s_rr());
    // Extrinsic noise.
    let row = n + m;
    linalg::set_block(&mut a, row, lay.a_rt(), &eye_m);
    linalg::set_block(&mut a, row, lay.a_r(), &-&eye_m);
    rhs.rows_mut(row, m).copy_from(&noise);
    let row = n + 2 * m;
    linalg::set_block(&mut a, row, lay.b_r(), &eye_m);
    linalg::set_block(&mut a, row, lay.b_rt(), &-&eye_m);
    rhs.rows_mut(row, m).copy_from(&-&noise);
    // Radiating structure, port rows.
    let row = n + 3 * m;
    linalg::set_block(&mut a, row, lay.b_rt(), &eye_m);
    linalg::set_block(&mut a, row, lay.a_rt(), &-r.coupling());
    rhs.rows_mut(row, m).copy_from(&r.receive_vector(&b_f));
    // PAs and LNAs.
    let row = n + 4 * m;
    linalg::set_block(&mut a, row, lay.a_t(), &eye_n);
    linalg::set_block(&mut a, row, lay.b_t(), &-&k.s_rf);
    let src = &k.k_vtx * &inputs.v_tx + &k.k_igamma * &inputs.i_gamma + &k.k_vgamma * &inputs.v_gamma;
    rhs.rows_mut(row, n).copy_from(&src);
    let row = 2 * n + 4 * m;
    let eye_rx = linalg::identity(n_rx);
    linalg::set_block(&mut a, row, lay.v_rx(), &eye_rx);
    linalg::set_block(&mut a, row, lay.b_t(), &-&k.k_vrx);
    linalg::set_block(&mut a, row, lay.a_t(), &k.k_vrx);
    let z_rx = model.frontend.z_rx_matrix();
    rhs.rows_mut(row, n_rx).copy_from(&(&z_rx * &inputs.i_gamma));

    let cond = linalg::condition_number(&a);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            context: "direct REMS system".into(),
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    let x = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned {
            context: "direct REMS system".into(),
            cond: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;
    let residual = relative_residual(&a, &x, &rhs, &[n, m, m, m, m, n, n_rx]);

    let seg = |start: usize, len: usize| -> CVector { x.rows(start, len).into_owned() };
    let a_rt = seg(lay.a_rt(), m);
    let a_f = &(r.tx_kernel() * &a_rt) + r.scatter_vector(&b_f);
    Ok(SolveState {
        a_t: seg(lay.a_t(), n),
        b_t: seg(lay.b_t(), n),
        a_r: seg(lay.a_r(), m),
        b_r: seg(lay.b_r(), m),
        a_r_tilde: a_rt,
        b_r_tilde: seg(lay.b_rt(), m),
        v_rx: seg(lay.v_rx(), n_rx),
        a_f: FarFieldPattern::from_vector(model.grid().clone(), &a_f)?,
        b_f: inputs.b_f.clone(),
        residual,
    })
}

/// Per-block residual `|A x - b|_inf / (|A|_inf |x|_inf + |b|_inf)`, maximized
/// over the row blocks.
fn relative_residual(a: &CMatrix, x: &CVector, rhs: &CVector, blocks: &[usize]) -> f64 {
    let res = a * x - rhs;
    let x_norm = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut start = 0;
    for &len in blocks {
        let rows = start..start + len;
        let r = rows.clone().map(|i| res[i].norm()).fold(0.0, f64::max);
        let a_norm = rows
            .clone()
            .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let b = rows.map(|i| rhs[i].norm()).fold(0.0, f64::max);
        let scale = a_norm * x_norm + b;
        if scale > 0.0 {
            worst = worst.max(r / scale);
        }
        start += len;
    }
    worst
}
