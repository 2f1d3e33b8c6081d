//! Joint impedance tuning and zero-forcing precoding for multiuser beam- and
//! null-forming.
//!
//! A coordinate-ascent search runs over the discrete load tuple. Every trial
//! rebuilds the gain operators, derives the co-polarized channel to the
//! primary users, applies zero-forcing and scores the result by
//!
//! ```text
//! f = P_signal / (P_interf + P_second + sigma)
//! ```

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constants::CONDITION_LIMIT;
use crate::farfield::{fmt_f64, Direction};
use crate::linalg;
use crate::solver::{rems_gain_with, GainOperators, RemsModel};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Estimate of the co-polarization seen by a user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoPolarization {
    /// The same `(theta, phi)` components in every direction.
    Fixed([C64; 2]),
    /// `(cos phi, -sin phi)`: x-polarized near the z-axis.
    Azimuthal,
}

impl CoPolarization {
    /// Unit-norm co-polarization vector at `d`.
    pub fn at(&self, d: Direction) -> [C64; 2] {
        let q = match self {
            CoPolarization::Fixed(q) => *q,
            CoPolarization::Azimuthal => [C64::new(d.phi.cos(), 0.0), C64::new(-d.phi.sin(), 0.0)],
        };
        let n = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
        if n > 0.0 {
            [q[0] / n, q[1] / n]
        } else {
            q
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamformProblem {
    pub primary: Vec<Direction>,
    pub secondary: Vec<Direction>,
    pub z_set: Vec<C64>,
    /// Index into `z_set` of the initial load.
    pub z_init: usize,
    /// One regularization value per sweep; its length is the sweep count.
    pub sigma_schedule: Vec<f64>,
    pub q_co: CoPolarization,
    pub seed: u64,
}

impl BeamformProblem {
    pub fn validate(&self, n_tx: usize) -> Result<()> {
        if self.primary.is_empty() {
            return Err(Error::invalid("at least one primary user is required"));
        }
        if self.primary.len() > n_tx {
            return Err(Error::invalid(format!(
                "{} primary users exceed the {n_tx} transmit chains",
                self.primary.len()
            )));
        }
        if self.z_set.is_empty() {
            return Err(Error::invalid("impedance set is empty"));
        }
        if self.z_init >= self.z_set.len() {
            return Err(Error::invalid(format!(
                "initial impedance index {} is outside the {}-element set",
                self.z_init,
                self.z_set.len()
            )));
        }
        if let Some(z) = self.z_set.iter().find(|z| !(z.re >= 0.0 && z.im.is_finite())) {
            return Err(Error::invalid(format!("impedance {z} is not in the closed right half-plane")));
        }
        if let Some(s) = self.sigma_schedule.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("regularization values must be positive, got {s}")));
        }
        Ok(())
    }

    pub fn i_max(&self) -> usize {
        self.sigma_schedule.len()
    }
}

/// Co-polarized channel from the PAs to the given directions, `U x N_Tx`.
pub fn h_co(ops: &GainOperators, dirs: &[Direction], q_co: &CoPolarization) -> CMatrix {
    let mut h = CMatrix::zeros(dirs.len(), ops.n_tx());
    for (u, &d) in dirs.iter().enumerate() {
        let g = ops.vtx_af_at(d);
        let q = q_co.at(d);
        for n in 0..ops.n_tx() {
            h[(u, n)] = q[0] * g[(0, n)] + q[1] * g[(1, n)];
        }
    }
    h
}

/// `H^H (H H^H)^-1`.
pub fn zf_precoder(h: &CMatrix) -> Result<CMatrix> {
    let gram = h * h.adjoint();
    let inv = linalg::checked_inverse_with_limit(&gram, "zero-forcing Gram matrix H H^H", CONDITION_LIMIT)?;
    Ok(h.adjoint() * inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiPowers {
    pub p_signal: f64,
    pub p_interf: f64,
    pub p_second: f64,
}

/// Quasi-powers of precoder `t`. Maxima over empty sets are zero.
pub fn quasi_powers(
    ops: &GainOperators,
    z_tx: &[C64],
    t: &CMatrix,
    problem: &BeamformProblem,
) -> Result<QuasiPowers> {
    let u_count = problem.primary.len();
    if t.ncols() != u_count || t.nrows() != ops.n_tx() {
        return Err(Error::invalid(format!(
            "precoder is {} x {}, expected {} x {u_count}",
            t.nrows(),
            t.ncols(),
            ops.n_tx()
        )));
    }
    let cols: Vec<CVector> = (0..u_count).map(|u| t.column(u).into_owned()).collect();
    let mut p_signal = f64::INFINITY;
    let mut p_interf: f64 = 0.0;
    let mut p_second: f64 = 0.0;
    for (u, &d) in problem.primary.iter().enumerate() {
        for (u2, col) in cols.iter().enumerate() {
            let g = rems_gain_with(ops, z_tx, col, d)?;
            if u2 == u {
                p_signal = p_signal.min(g);
            } else {
                p_interf = p_interf.max(g);
            }
        }
    }
    for &d in &problem.secondary {
        for col in &cols {
            p_second = p_second.max(rems_gain_with(ops, z_tx, col, d)?);
        }
    }
    Ok(QuasiPowers {
        p_signal,
        p_interf,
        p_second,
    })
}

/// Objective value kept as numerator and denominator so that a vanishing
/// denominator still orders totally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub p_signal: f64,
    pub denominator: f64,
}

impl Objective {
    pub const ZERO: Objective = Objective {
        p_signal: 0.0,
        denominator: 1.0,
    };

    /// `p_signal / denominator`; infinite for a zero denominator with signal.
    pub fn value(&self) -> f64 {
        if self.denominator > 0.0 {
            self.p_signal / self.denominator
        } else if self.p_signal > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Strict improvement. Zero-denominator candidates rank above every
    /// finite value and compare by `(p_signal, -denominator)` among themselves.
    pub fn improves_on(&self, other: &Objective) -> bool {
        let self_inf = self.denominator <= 0.0 && self.p_signal > 0.0;
        let other_inf = other.denominator <= 0.0 && other.p_signal > 0.0;
        match (self_inf, other_inf) {
            (true, true) => {
                self.p_signal > other.p_signal
                    || (self.p_signal == other.p_signal && self.denominator < other.denominator)
            }
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.value() > other.value(),
        }
    }
}

pub fn objective(q: &QuasiPowers, sigma: f64) -> Objective {
    Objective {
        p_signal: q.p_signal,
        denominator: q.p_interf + q.p_second + sigma,
    }
}

/// Outcome of [`coordinate_ascent`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformResult {
    /// Indices into the impedance set.
    pub z_indices: Vec<usize>,
    /// `N_Tx x U` precoder.
    pub t: CMatrix,
    /// Objective after every accepted update.
    pub f_trace: Vec<f64>,
    pub evaluations: usize,
}

impl BeamformResult {
    pub fn f_best(&self) -> f64 {
        self.f_trace.last().copied().unwrap_or(0.0)
    }

    /// Plain-text result file.
    pub fn to_text(&self, z_set: &[C64]) -> String {
        let mut out = String::from("# beamforming result\n");
        let _ = writeln!(out, "evaluations,{}", self.evaluations);
        out.push_str("[z_tuple]\nelement,z_index,re_z,im_z\n");
        for (r, &i) in self.z_indices.iter().enumerate() {
            let z = z_set[i];
            let _ = writeln!(out, "{r},{i},{},{}", fmt_f64(z.re), fmt_f64(z.im));
        }
        out.push_str("[precoder]\nrow,col,re,im\n");
        for r in 0..self.t.nrows() {
            for c in 0..self.t.ncols() {
                let v = self.t[(r, c)];
                let _ = writeln!(out, "{r},{c},{},{}", fmt_f64(v.re), fmt_f64(v.im));
            }
        }
        out.push_str("[f_trace]\nstep,f\n");
        for (i, f) in self.f_trace.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", fmt_f64(*f));
        }
        out
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(fields: &[&str], i: usize, line: usize) -> Result<T> {
    let raw = fields.get(i).ok_or_else(|| parse_err(line, format!("missing column {}", i + 1)))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{}'", raw.trim())))
}

impl BeamformResult {
    /// Reads a file written by [`BeamformResult::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut skip_columns = false;
        let mut evaluations = None;
        let mut z_indices = Vec::new();
        let mut entries = Vec::new();
        let mut f_trace = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                section = name.to_string();
                skip_columns = true;
                continue;
            }
            if skip_columns {
                skip_columns = false;
                continue;
            }
            let f: Vec<&str> = l.split(',').collect();
            match section.as_str() {
                "" if f[0] == "evaluations" => evaluations = Some(field::<usize>(&f, 1, line)?),
                "z_tuple" => {
                    if field::<usize>(&f, 0, line)? != z_indices.len() {
                        return Err(parse_err(line, "z_tuple elements out of order"));
                    }
                    z_indices.push(field(&f, 1, line)?);
                }
                "precoder" => entries.push((
                    field::<usize>(&f, 0, line)?,
                    field::<usize>(&f, 1, line)?,
                    C64::new(field(&f, 2, line)?, field(&f, 3, line)?),
                )),
                "f_trace" => f_trace.push(field(&f, 1, line)?),
                _ => return Err(parse_err(line, format!("unexpected record '{l}'"))),
            }
        }
        let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let cols = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        if entries.len() != rows * cols {
            return Err(Error::Incomplete(format!(
                "precoder has {} of {} entries",
                entries.len(),
                rows * cols
            )));
        }
        let mut t = CMatrix::zeros(rows, cols);
        for (r, c, v) in entries {
            t[(r, c)] = v;
        }
        Ok(BeamformResult {
            z_indices,
            t,
            f_trace,
            evaluations: evaluations.ok_or_else(|| Error::Incomplete("evaluations count".into()))?,
        })
    }
}

/// Objective and zero-forcing precoder of one load tuple.
#[derive(Debug, Clone)]
pub struct Trial {
    pub objective: Objective,
    pub t: CMatrix,
}

pub fn evaluate_configuration<B>(
    builder: &B,
    z_indices: &[usize],
    problem: &BeamformProblem,
    sigma: f64,
) -> Result<Trial>
where
    B: Fn(&[usize]) -> Result<RemsModel>,
{
    let model = builder(z_indices)?;
    let ops = model.build_gain_operators()?;
    let h = h_co(&ops, &problem.primary, &problem.q_co);
    let t = zf_precoder(&h)?;
    let q = quasi_powers(&ops, model.frontend().z_tx(), &t, problem)?;
    Ok(Trial {
        objective: objective(&q, sigma),
        t,
    })
}

/// Fisher-Yates shuffle of `0..n`.
pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Coordinate ascent over `r` reconfigurable loads. `builder` maps a tuple
/// of indices into `problem.z_set` to a model.
pub fn coordinate_ascent<B>(problem: &BeamformProblem, r: usize, builder: B) -> Result<BeamformResult>
where
    B: Fn(&[usize]) -> Result<RemsModel> + Sync,
{
    let init = vec![problem.z_init; r];
    let first = builder(&init)?;
    let n_tx = first.n_tx();
    problem.validate(n_tx)?;
    let u_count = problem.primary.len();
    let mut best_t = CMatrix::identity(n_tx, u_count);
    let mut best_z = init;
    let mut f_best = Objective::ZERO;
    let mut f_trace = Vec::new();
    let mut evaluations = 0;

    if r == 0 {
        let ops = first.build_gain_operators()?;
        let sigma = problem.sigma_schedule.first().copied().unwrap_or(0.0);
        let q = quasi_powers(&ops, first.frontend().z_tx(), &best_t, problem)?;
        let f = objective(&q, sigma);
        evaluations += 1;
        if f.improves_on(&f_best) {
            f_trace.push(f.value());
        }
        return Ok(BeamformResult {
            z_indices: best_z,
            t: best_t,
            f_trace,
            evaluations,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    for (sweep, &sigma) in problem.sigma_schedule.iter().enumerate() {
        for coord in permutation(&mut rng, r) {
            let trials: Vec<(usize, Result<Trial>)> = (0..problem.z_set.len())
                .into_par_iter()
                .map(|zi| {
                    let mut eval = best_z.clone();
                    eval[coord] = zi;
                    (zi, evaluate_configuration(&builder, &eval, problem, sigma))
                })
                .collect();
            for (zi, trial) in trials {
                evaluations += 1;
                match trial {
                    Ok(trial) => {
                        if trial.objective.improves_on(&f_best) {
                            best_z[coord] = zi;
                            best_t = trial.t;
                            f_best = trial.objective;
                            f_trace.push(f_best.value());
                        }
                    }
                    Err(e) => log::warn!(
                        "sweep {sweep}, element {coord}, impedance {zi}: skipped ({e})"
                    ),
                }
            }
        }
        log::info!("sweep {sweep}: sigma {sigma:.4e}, f_best {:.6e}", f_best.value());
    }
    Ok(BeamformResult {
        z_indices: best_z,
        t: best_t,
        f_trace,
        evaluations,
    })
}
