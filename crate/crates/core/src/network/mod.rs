//! Tuning networks, reconfigurable terminations and the RF frontend.
//!
//! All scattering matrices use one real reference resistance `r0` and the
//! power-wave convention `a = (v + r0 i) / (2 sqrt(r0))`,
//! `b = (v - r0 i) / (2 sqrt(r0))`.

mod frontend;
pub mod touchstone;

use std::fmt::Write as _;

use crate::constants::{CONDITION_LIMIT, PASSIVITY_SLACK};
use crate::farfield::fmt_f64;
use crate::linalg;
use crate::{CMatrix, Error, Result, C64};

pub use frontend::{KMatrices, LnaBlocks, PaBlocks, RfFrontend};

/// Result of [`passivity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passivity {
    pub passive: bool,
    pub sigma_max: f64,
}

/// Largest singular value test: passive iff `sigma_max <= 1 + 1e-9`.
pub fn passivity_check(s: &CMatrix) -> Result<Passivity> {
    if !s.is_square() {
        return Err(Error::invalid(format!(
            "scattering matrix must be square, got {} x {}",
            s.nrows(),
            s.ncols()
        )));
    }
    let sigma_max = linalg::sigma_max(s);
    Ok(Passivity {
        passive: sigma_max <= 1.0 + PASSIVITY_SLACK,
        sigma_max,
    })
}

/// A one-port load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Impedance {
    Finite(C64),
    /// Open circuit.
    Open,
}

impl From<C64> for Impedance {
    fn from(z: C64) -> Self {
        Impedance::Finite(z)
    }
}

/// Reflection coefficient `(z - r0) / (z + r0)` of a load; an open circuit
/// reflects with `+1`.
pub fn impedance_to_reflection(z: impl Into<Impedance>, r0: f64) -> Result<C64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::invalid(format!("reference resistance must be positive, got {r0}")));
    }
    match z.into() {
        Impedance::Open => Ok(C64::new(1.0, 0.0)),
        Impedance::Finite(z) => {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::invalid(format!("impedance {z} is not finite")));
            }
            if z.re < 0.0 {
                return Err(Error::invalid(format!("impedance {z} has a negative real part")));
            }
            let den = z + r0;
            if den.norm() == 0.0 {
                return Err(Error::invalid("impedance equals -r0"));
            }
            Ok((z - r0) / den)
        }
    }
}

/// Reflection table as CSV `index,re_gamma,im_gamma`.
pub fn reflection_csv(z_set: &[C64], r0: f64) -> Result<String> {
    let mut out = String::from("index,re_gamma,im_gamma\n");
    for (i, &z) in z_set.iter().enumerate() {
        let g = impedance_to_reflection(z, r0)?;
        let _ = writeln!(out, "{i},{},{}", fmt_f64(g.re), fmt_f64(g.im));
    }
    Ok(out)
}

/// Passive `(N + M)`-port between the RF frontend (first `N` ports) and the
/// radiating structure (last `M` ports).
///
/// `[b_T; a_R] = S [a_T; b_R]` with `a_R` the waves leaving towards the
/// radiating structure.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningNetwork {
    n: usize,
    m: usize,
    s: CMatrix,
}

impl TuningNetwork {
    pub fn new(s: CMatrix, n: usize) -> Result<Self> {
        let p = passivity_check(&s)?;
        if n > s.nrows() {
            return Err(Error::invalid(format!(
                "{n} frontend ports exceed the {}-port network",
                s.nrows()
            )));
        }
        if !p.passive {
            return Err(Error::NotPassive(p.sigma_max));
        }
        let m = s.nrows() - n;
        Ok(TuningNetwork { n, m, s })
    }

    /// Builds the network from its four blocks.
    pub fn from_blocks(tt: &CMatrix, tr: &CMatrix, rt: &CMatrix, rr: &CMatrix) -> Result<Self> {
        let (n, m) = (tt.nrows(), rr.nrows());
        if tt.ncols() != n || tr.shape() != (n, m) || rt.shape() != (m, n) || rr.ncols() != m {
            return Err(Error::invalid("tuning network blocks have inconsistent shapes"));
        }
        let mut s = CMatrix::zeros(n + m, n + m);
        linalg::set_block(&mut s, 0, 0, tt);
        linalg::set_block(&mut s, 0, n, tr);
        linalg::set_block(&mut s, n, 0, rt);
        linalg::set_block(&mut s, n, n, rr);
        Self::new(s, n)
    }

    /// Matched, lossless through connection of frontend port `i` to
    /// radiating port `i`.
    pub fn through(n: usize) -> Self {
        let mut s = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            s[(i, n + i)] = C64::new(1.0, 0.0);
            s[(n + i, i)] = C64::new(1.0, 0.0);
        }
        TuningNetwork { n, m: n, s }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.s
    }

    pub fn s_tt(&self) -> CMatrix {
        linalg::block(&self.s, 0, 0, self.n, self.n)
    }

    pub fn s_tr(&self) -> CMatrix {
        linalg::block(&self.s, 0, self.n, self.n, self.m)
    }

    pub fn s_rt(&self) -> CMatrix {
        linalg::block(&self.s, self.n, 0, self.m, self.n)
    }

    pub fn s_rr(&self) -> CMatrix {
        linalg::block(&self.s, self.n, self.n, self.m, self.m)
    }

    pub fn sigma_max(&self) -> f64 {
        linalg::sigma_max(&self.s)
    }
}

/// Fixed `(N + M + R)`-port network whose last `R` ports are terminated by
/// uncoupled tunable loads.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigurableNetwork {
    fixed: CMatrix,
    n: usize,
    m: usize,
    r0: f64,
    z_set: Vec<C64>,
}

impl ReconfigurableNetwork {
    pub fn new(fixed: CMatrix, n: usize, m: usize, r0: f64, z_set: Vec<C64>) -> Result<Self> {
        let p = passivity_check(&fixed)?;
        if n + m > fixed.nrows() {
            return Err(Error::invalid(format!(
                "{} kept ports exceed the {}-port fixed network",
                n + m,
                fixed.nrows()
            )));
        }
        if !p.passive {
            return Err(Error::NotPassive(p.sigma_max));
        }
        for &z in &z_set {
            impedance_to_reflection(z, r0)?;
        }
        Ok(ReconfigurableNetwork {
            fixed,
            n,
            m,
            r0,
            z_set,
        })
    }

    /// Direct wiring: frontend port `i` feeds structure port `i` and every
    /// remaining structure port is loaded by its own tunable impedance.
    pub fn direct(n: usize, m: usize, r0: f64, z_set: Vec<C64>) -> Result<Self> {
        if n > m {
            return Err(Error::invalid(format!(
                "{n} frontend ports cannot be wired to a {m}-port structure"
            )));
        }
        let r = m - n;
        let size = n + m + r;
        let mut fixed = CMatrix::zeros(size, size);
        let one = C64::new(1.0, 0.0);
        for i in 0..n {
            fixed[(i, n + i)] = one;
            fixed[(n + i, i)] = one;
        }
        for k in 0..r {
            let (port, load) = (2 * n + k, n + m + k);
            fixed[(port, load)] = one;
            fixed[(load, port)] = one;
        }
        Self::new(fixed, n, m, r0, z_set)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of reconfigurable one-ports.
    pub fn r(&self) -> usize {
        self.fixed.nrows() - self.n - self.m
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn z_set(&self) -> &[C64] {
        &self.z_set
    }

    pub fn fixed(&self) -> &CMatrix {
        &self.fixed
    }

    /// Terminates the reconfigurable ports with the given loads.
    pub fn reduce(&self, z_tuple: &[Impedance]) -> Result<TuningNetwork> {
        let gammas = z_tuple
            .iter()
            .map(|&z| impedance_to_reflection(z, self.r0))
            .collect::<Result<Vec<_>>>()?;
        self.reduce_reflections(&gammas)
    }

    /// Terminates with loads picked from the impedance set by index.
    pub fn reduce_indices(&self, idx: &[usize]) -> Result<TuningNetwork> {
        let z = idx
            .iter()
            .map(|&i| {
                self.z_set
                    .get(i)
                    .map(|&z| Impedance::Finite(z))
                    .ok_or_else(|| Error::invalid(format!("impedance index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.reduce(&z)
    }

    /// `S_AA + S_AB G (I - S_BB G)^-1 S_BA` for load reflections `G`.
    pub fn reduce_reflections(&self, gammas: &[C64]) -> Result<TuningNetwork> {
        let r = self.r();
        if gammas.len() != r {
            return Err(Error::DimensionMismatch {
                context: "termination tuple",
                expected: r,
                found: gammas.len(),
            });
        }
        let a = self.n + self.m;
        let s_aa = linalg::block(&self.fixed, 0, 0, a, a);
        if r == 0 {
            return Ok(TuningNetwork {
                n: self.n,
                m: self.m,
                s: s_aa,
            });
        }
        let s_ab = linalg::block(&self.fixed, 0, a, a, r);
        let s_ba = linalg::block(&self.fixed, a, 0, r, a);
        let s_bb = linalg::block(&self.fixed, a, a, r, r);
        let g = linalg::diag(gammas);
        let loop_m = linalg::identity(r) - &s_bb * &g;
        let inv = linalg::checked_inverse_with_limit(&loop_m, "termination I - S_BB G", CONDITION_LIMIT)?;
        let s = s_aa + s_ab * g * inv * s_ba;
        Ok(TuningNetwork {
            n: self.n,
            m: self.m,
            s,
        })
    }
}
