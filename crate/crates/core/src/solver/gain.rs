//! Closed-form gain operators.
//!
//! Operators that end in the far field are stored in port space: the part
//! that produces the waves `a_R~` entering the radiating structure, to which
//! the transmit kernel is applied on demand. Operators that start in the far
//! field act on the weighted receive pairing `R(b_F)`.

use std::sync::Arc;

use super::{Inputs, RemsModel};
use crate::farfield::{Direction, FarFieldPattern};
use crate::linalg;
use crate::radiating::RadiatingStructure;
use crate::{CMatrix, CVector, Result, C64};

#[derive(Debug, Clone)]
pub struct GainOperators {
    radiating: Arc<RadiatingStructure>,
    n_tx: usize,
    n_rx: usize,
    /// `M x N_Tx`: `a_R~` per unit PA voltage.
    vtx_ar: CMatrix,
    /// `M x M`: `a_R~` per unit `R(b_F)`.
    bf_ar: CMatrix,
    vtx_vrx: CMatrix,
    vgamma_vrx: CMatrix,
    igamma_vrx: CMatrix,
    vupsilon_vrx: CMatrix,
    /// `N_Rx x M`: `v_Rx` per unit `R(b_F)`.
    bf_vrx: CMatrix,
}

/// Model outputs.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub v_rx: CVector,
    pub a_f: FarFieldPattern,
}

impl GainOperators {
    pub fn build(model: &RemsModel) -> Result<Self> {
        let (n, m) = (model.n(), model.m());
        let t = model.tuning();
        let r = model.radiating();
        let k = model.frontend().assemble_k_matrices();
        let (s_tt, s_tr, s_rt, s_trr) = (t.s_tt(), t.s_tr(), t.s_rt(), t.s_rr());
        let s_r = r.coupling();
        let s_rf = &k.s_rf;
        let eye_n = linalg::identity(n);
        let eye_m = linalg::identity(m);

        let l1 = s_rf * &s_tt;
        let l2 = &s_trr * s_r;
        let inv2 = linalg::checked_inverse(&(&eye_m - &l2), "loop I - L2")?;
        let l3 = s_rf * &s_tr * s_r * &inv2 * &s_rt;
        let inv13 = linalg::checked_inverse(&(&eye_n - &l1 - &l3), "loop I - L1 - L3")?;
        let l5 = &s_tt * s_rf;
        let inv5 = linalg::checked_inverse(&(&eye_n - &l5), "loop I - L5")?;
        let l6 = s_r * &s_trr;
        let l7 = s_r * &s_rt * s_rf * &inv5 * &s_tr;
        let inv67 = linalg::checked_inverse(&(&eye_m - &l6 - &l7), "loop I - L6 - L7")?;

        let vtx_ar = &inv2 * &s_rt * &inv13 * &k.k_vtx;
        let chain = &k.k_vrx * (&s_tr * s_r * &inv2 * &s_rt + &s_tt - &eye_n) * &inv13;
        let vtx_vrx = &chain * &k.k_vtx;
        let vgamma_vrx = &chain * &k.k_vgamma;
        let igamma_vrx = &chain * &k.k_igamma + model.frontend().z_rx_matrix();

        let bf_vrx = &k.k_vrx * (&eye_n - s_rf) * &inv5 * &s_tr * &inv67;
        let bf_ar = (&s_rt * s_rf * &inv5 * &s_tr + &s_trr) * &inv67;
        let vupsilon_vrx = if r.extrinsic_noise_enabled() {
            &bf_vrx * (s_r - &eye_m) * C64::new(1.0 / (2.0 * model.r0().sqrt()), 0.0)
        } else {
            CMatrix::zeros(model.n_rx(), m)
        };

        Ok(GainOperators {
            radiating: r.clone(),
            n_tx: model.n_tx(),
            n_rx: model.n_rx(),
            vtx_ar,
            bf_ar,
            vtx_vrx,
            vgamma_vrx,
            igamma_vrx,
            vupsilon_vrx,
            bf_vrx,
        })
    }

    pub fn radiating(&self) -> &Arc<RadiatingStructure> {
        &self.radiating
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    /// Port waves `a_R~` per unit PA voltage, `M x N_Tx`.
    pub fn vtx_port_waves(&self) -> &CMatrix {
        &self.vtx_ar
    }

    /// Transmit operator sampled at one direction, `2 x N_Tx`.
    pub fn vtx_af_at(&self, d: Direction) -> CMatrix {
        self.radiating.tx_at(d) * &self.vtx_ar
    }

    /// Transmit operator on the whole grid, `2K x N_Tx`.
    pub fn g_vtx_af(&self) -> CMatrix {
        self.radiating.tx_kernel() * &self.vtx_ar
    }

    pub fn apply_vtx_af(&self, v_tx: &CVector) -> Result<FarFieldPattern> {
        self.radiating.apply_transmit(&(&self.vtx_ar * v_tx))
    }

    /// Outgoing pattern caused by an incoming pattern.
    pub fn apply_bf_af(&self, b_f: &FarFieldPattern) -> Result<FarFieldPattern> {
        let y = self.radiating.apply_receive(b_f)?;
        let mut a_f = self.radiating.apply_transmit(&(&self.bf_ar * y))?;
        a_f.add_assign(&self.radiating.apply_scatter(b_f)?)?;
        Ok(a_f)
    }

    pub fn apply_bf_vrx(&self, b_f: &FarFieldPattern) -> Result<CVector> {
        Ok(&self.bf_vrx * self.radiating.apply_receive(b_f)?)
    }

    /// Receive operator on the whole grid, `N_Rx x 2K`, quadrature weights included.
    pub fn g_bf_vrx(&self) -> CMatrix {
        &self.bf_vrx * self.radiating.receive_matrix()
    }

    pub fn g_vtx_vrx(&self) -> &CMatrix {
        &self.vtx_vrx
    }

    pub fn g_vgamma_vrx(&self) -> &CMatrix {
        &self.vgamma_vrx
    }

    pub fn g_igamma_vrx(&self) -> &CMatrix {
        &self.igamma_vrx
    }

    pub fn g_vupsilon_vrx(&self) -> &CMatrix {
        &self.vupsilon_vrx
    }

    /// Superposition of every operator acting on its input. Noise does not
    /// contribute to `a_f`.
    pub fn evaluate(&self, inputs: &Inputs) -> Result<Outputs> {
        inputs.check(
            self.n_tx,
            self.n_rx,
            self.radiating.m_ports(),
            self.radiating.grid(),
        )?;
        let y = self.radiating.apply_receive(&inputs.b_f)?;
        let v_rx = &self.vtx_vrx * &inputs.v_tx
            + &self.vgamma_vrx * &inputs.v_gamma
            + &self.igamma_vrx * &inputs.i_gamma
            + &self.vupsilon_vrx * &inputs.v_upsilon
            + &self.bf_vrx * &y;
        let ports = &self.vtx_ar * &inputs.v_tx + &self.bf_ar * &y;
        let mut a_f = self.radiating.apply_transmit(&ports)?;
        a_f.add_assign(&self.radiating.apply_scatter(&inputs.b_f)?)?;
        Ok(Outputs { v_rx, a_f })
    }
}
