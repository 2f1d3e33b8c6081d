//! Power-amplifier and low-noise-amplifier port models.

use crate::linalg;
use crate::{CMatrix, Error, Result, C64};

/// Linear RF frontend: `N_Tx` PAs followed by `N_Rx` LNAs, all with diagonal
/// (uncoupled) internal impedances.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrontend {
    z_tx: Vec<C64>,
    z_rx: Vec<C64>,
    r0: f64,
}

/// PA-side diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct PaBlocks {
    pub s_rf_tx: Vec<C64>,
    pub k_vtx: Vec<C64>,
}

/// LNA-side diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct LnaBlocks {
    pub s_rf_rx: Vec<C64>,
    pub k_igamma: Vec<C64>,
    pub k_vgamma: Vec<C64>,
    pub k_vrx: Vec<C64>,
}

/// Zero-padded frontend matrices over all `N = N_Tx + N_Rx` ports.
#[derive(Debug, Clone, PartialEq)]
pub struct KMatrices {
    /// `N x N_Tx`.
    pub k_vtx: CMatrix,
    /// `N x N_Rx`.
    pub k_vgamma: CMatrix,
    /// `N x N_Rx`.
    pub k_igamma: CMatrix,
    /// `N_Rx x N`.
    pub k_vrx: CMatrix,
    /// `N x N` block diagonal.
    pub s_rf: CMatrix,
}

fn check(z: &[C64], what: &str) -> Result<()> {
    for (i, v) in z.iter().enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::invalid(format!(
                "{what} impedance {i} must be finite (open circuits are not supported)"
            )));
        }
        if v.re <= 0.0 {
            return Err(Error::invalid(format!(
                "{what} impedance {i} = {v} needs a strictly positive real part"
            )));
        }
    }
    Ok(())
}

impl RfFrontend {
    pub fn new(z_tx: Vec<C64>, z_rx: Vec<C64>, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::invalid(format!("reference resistance must be positive, got {r0}")));
        }
        check(&z_tx, "PA")?;
        check(&z_rx, "LNA")?;
        Ok(RfFrontend { z_tx, z_rx, r0 })
    }

    /// `n_tx` PAs and `n_rx` LNAs, all matched to `r0`.
    pub fn matched(n_tx: usize, n_rx: usize, r0: f64) -> Result<Self> {
        let z = C64::new(r0, 0.0);
        Self::new(vec![z; n_tx], vec![z; n_rx], r0)
    }

    pub fn n_tx(&self) -> usize {
        self.z_tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.z_rx.len()
    }

    pub fn n(&self) -> usize {
        self.n_tx() + self.n_rx()
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn z_tx(&self) -> &[C64] {
        &self.z_tx
    }

    pub fn z_rx(&self) -> &[C64] {
        &self.z_rx
    }

    pub fn pa_blocks(&self) -> PaBlocks {
        let r0 = self.r0;
        let sq = r0.sqrt();
        PaBlocks {
            s_rf_tx: self.z_tx.iter().map(|&z| (z - r0) / (z + r0)).collect(),
            k_vtx: self.z_tx.iter().map(|&z| sq / (z + r0)).collect(),
        }
    }

    pub fn lna_blocks(&self) -> LnaBlocks {
        let r0 = self.r0;
        let sq = r0.sqrt();
        LnaBlocks {
            s_rf_rx: self.z_rx.iter().map(|&z| (z - r0) / (z + r0)).collect(),
            k_igamma: self.z_rx.iter().map(|&z| z * sq / (z + r0)).collect(),
            k_vgamma: self.z_rx.iter().map(|&z| sq / (z + r0)).collect(),
            k_vrx: self.z_rx.iter().map(|&z| z / sq).collect(),
        }
    }

    pub fn assemble_k_matrices(&self) -> KMatrices {
        let (nt, nr) = (self.n_tx(), self.n_rx());
        let n = nt + nr;
        let pa = self.pa_blocks();
        let lna = self.lna_blocks();
        let mut k = KMatrices {
            k_vtx: CMatrix::zeros(n, nt),
            k_vgamma: CMatrix::zeros(n, nr),
            k_igamma: CMatrix::zeros(n, nr),
            k_vrx: CMatrix::zeros(nr, n),
            s_rf: CMatrix::zeros(n, n),
        };
        for i in 0..nt {
            k.k_vtx[(i, i)] = pa.k_vtx[i];
            k.s_rf[(i, i)] = pa.s_rf_tx[i];
        }
        for i in 0..nr {
            k.k_vgamma[(nt + i, i)] = lna.k_vgamma[i];
            k.k_igamma[(nt + i, i)] = lna.k_igamma[i];
            k.k_vrx[(i, nt + i)] = lna.k_vrx[i];
            k.s_rf[(nt + i, nt + i)] = lna.s_rf_rx[i];
        }
        k
    }

    /// `diag(Z_Rx)`.
    pub fn z_rx_matrix(&self) -> CMatrix {
        linalg::diag(&self.z_rx)
    }

    /// `diag(1 / Re Z_Tx)`.
    pub fn re_z_tx_inverse(&self) -> Vec<f64> {
        self.z_tx.iter().map(|z| 1.0 / z.re).collect()
    }
}
