use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Unit, Vector3};
use rayon::prelude::*;

use rems_core::beamform::{coordinate_ascent, BeamformResult};
use rems_core::channel::{far_channel, sweep_csv, Placement};
use rems_core::farfield::fmt_f64;
use rems_core::network::touchstone;
use rems_core::radiating::io::{parse_responses, write_bundle};
use rems_core::radiating::structure_from_responses;
use rems_core::solver::{efficiencies, power_metrics, rems_gain_with, solve_direct, to_db, Inputs};
use rems_core::{CVector, Direction, GainOperators, C64};

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;
use crate::scene::Scene;

fn user(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn grid(scene: &Scene, out: &Path) -> CliResult<Vec<PathBuf>> {
    Ok(vec![write_atomic(out, "grid.csv", &scene.grid.to_csv())?])
}

pub fn extract(
    responses: &Path,
    coupling: Option<&Path>,
    output: Option<&str>,
    out: &Path,
) -> CliResult<Vec<PathBuf>> {
    let shown = responses.display().to_string();
    let text = std::fs::read_to_string(responses).map_err(|e| user(format!("cannot read {shown}: {e}")))?;
    let resp = parse_responses(&text).map_err(|e| user(format!("{shown}: {e}")))?;
    let coupling = match coupling {
        None => None,
        Some(p) => {
            let name = p.display().to_string();
            let text = std::fs::read_to_string(p).map_err(|e| user(format!("cannot read {name}: {e}")))?;
            let ports = touchstone::ports_from_extension(&name)
                .ok_or_else(|| user(format!("{name}: cannot infer the port count from the extension")))?;
            let ts = touchstone::parse(&text, ports).map_err(|e| user(format!("{name}: {e}")))?;
            Some(ts.matrix_at(resp.frequency, 1e-9)?)
        }
    };
    let s = structure_from_responses(&resp, coupling).map_err(|e| match e {
        e if e.is_numeric() => CliError::Core(e),
        e => user(format!("{shown}: {e}")),
    })?;
    let name = match output {
        Some(n) => n.to_string(),
        None => {
            let stem = responses.file_stem().and_then(|s| s.to_str()).unwrap_or("responses");
            format!("{stem}_kernels.txt")
        }
    };
    Ok(vec![write_atomic(out, &name, &write_bundle(&s))?])
}

fn rel_dev(a: &CVector, b: &CVector) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn solve(scene: &Scene, model_name: &str, tol: f64, out: &Path) -> CliResult<Vec<PathBuf>> {
    let resolved = scene.model(model_name, None)?;
    let model = &resolved.model;
    let inputs = Inputs::transmit(model, resolved.v_tx.clone());
    let ops = model.build_gain_operators()?;
    let state = solve_direct(model, &inputs)?;
    if state.residual > tol {
        return Err(CliError::Tolerance {
            what: "direct solve residual".into(),
            found: state.residual,
            tol,
        });
    }
    let dev = rel_dev(&ops.evaluate(&inputs)?.a_f.to_vector(), &state.a_f.to_vector());
    if dev > tol {
        return Err(CliError::Tolerance {
            what: "gain operators against the direct solve".into(),
            found: dev,
            tol,
        });
    }

    let p = power_metrics(&state);
    let mut report = String::from("# solve report\n");
    let _ = writeln!(report, "model,{model_name}");
    let _ = writeln!(report, "residual,{}", fmt_f64(state.residual));
    let _ = writeln!(report, "operator_deviation,{}", fmt_f64(dev));
    report.push_str("[powers]\nquantity,watts\n");
    let p_a = rems_core::solver::available_power(&resolved.v_tx, model.frontend().z_tx())?;
    for (name, v) in [("p_a", p_a), ("p_t", p.p_t), ("p_r", p.p_r), ("p_f", p.p_f)] {
        let _ = writeln!(report, "{name},{}", fmt_f64(v));
    }
    report.push_str("[efficiencies]\nstage,value\n");
    match efficiencies(model, &resolved.v_tx) {
        Ok(e) => {
            for (name, v) in [
                ("matching", e.eta_matching),
                ("tuning", e.eta_tuning),
                ("radiating", e.eta_radiating),
            ] {
                let _ = writeln!(report, "{name},{}", fmt_f64(v));
            }
        }
        Err(rems_core::Error::UndefinedStage(stage)) => {
            log::warn!("{stage} efficiency is undefined for this drive");
        }
        Err(e) => return Err(e.into()),
    }
    report.push_str("[ports]\nport,re_a_t,im_a_t,re_b_t,im_b_t\n");
    for (i, (a, b)) in state.a_t.iter().zip(state.b_t.iter()).enumerate() {
        let _ = writeln!(report, "{i},{},{},{},{}", fmt_f64(a.re), fmt_f64(a.im), fmt_f64(b.re), fmt_f64(b.im));
    }
    Ok(vec![
        write_atomic(out, &format!("{model_name}_solve.txt"), &report)?,
        write_atomic(out, &format!("{model_name}_pattern.csv"), &state.a_f.to_csv())?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    /// Rotate the receiving structure by `alpha` degrees.
    Rotation,
    /// Move the receiving structure along the line of sight, metres.
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    X,
    Y,
    Z,
    /// Line of sight from the transmitter to the receiver.
    Los,
}

pub struct ChannelArgs<'a> {
    pub from: &'a str,
    pub to: &'a str,
    pub sweep: SweepKind,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub axis: Axis,
    pub tx_port: usize,
    pub rx_port: usize,
    pub output: Option<&'a str>,
}

fn sweep_values(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn channel(scene: &Scene, args: &ChannelArgs, out: &Path) -> CliResult<Vec<PathBuf>> {
    let a = scene.structure(args.from)?;
    let b = scene.structure(args.to)?;
    if args.tx_port >= a.structure.m_ports() || args.rx_port >= b.structure.m_ports() {
        return Err(user(format!(
            "port out of range: '{}' has {} ports, '{}' has {}",
            args.from,
            a.structure.m_ports(),
            args.to,
            b.structure.m_ports()
        )));
    }
    let offset = b.position - a.position;
    let distance = offset.norm();
    if !(distance > 0.0) {
        return Err(user(format!("'{}' and '{}' share the same position", args.from, args.to)));
    }
    let los = offset / distance;
    let values = sweep_values(args.start, args.stop, args.points);
    let rows = values
        .par_iter()
        .map(|&x| -> CliResult<(f64, C64)> {
            let s21 = match args.sweep {
                SweepKind::Rotation => {
                    let axis = match args.axis {
                        Axis::X => Vector3::x(),
                        Axis::Y => Vector3::y(),
                        Axis::Z => Vector3::z(),
                        Axis::Los => los,
                    };
                    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), x.to_radians());
                    let rx = b.structure.rotated(&rot);
                    far_channel(&a.structure, &rx, &Placement::new(distance, los)?)?.s21
                }
                SweepKind::Distance => {
                    if !(x > 0.0) {
                        return Err(user(format!("sweep distance {x} m is not positive")));
                    }
                    far_channel(&a.structure, &b.structure, &Placement::new(x, los)?)?.s21
                }
            };
            Ok((x, s21[(args.rx_port, args.tx_port)]))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let column = match args.sweep {
        SweepKind::Rotation => "alpha_deg",
        SweepKind::Distance => "distance_m",
    };
    let name = args
        .output
        .map(str::to_string)
        .unwrap_or_else(|| format!("channel_{}_{}.csv", args.from, args.to));
    Ok(vec![write_atomic(out, &name, &sweep_csv(column, &rows))?])
}

/// Gain along the great circle through `phi`: rows `theta_deg,gain_db` for
/// `theta` in `[-180, 180]`, where negative `theta` means `(-theta, phi + 180)`.
pub fn gain_slice_csv(ops: &GainOperators, z_tx: &[C64], v: &CVector, phi_deg: f64, step_deg: f64) -> CliResult<String> {
    if !(step_deg > 0.0 && step_deg <= 360.0) {
        return Err(user(format!("theta step {step_deg} must lie in (0, 360] degrees")));
    }
    let n = (360.0 / step_deg).round() as usize;
    let mut out = String::from("theta_deg,gain_db\n");
    for i in 0..=n {
        let theta = (-180.0 + i as f64 * step_deg).min(180.0);
        let d = if theta < 0.0 {
            Direction::from_degrees(-theta, phi_deg + 180.0)
        } else {
            Direction::from_degrees(theta, phi_deg)
        };
        let g = rems_gain_with(ops, z_tx, v, d)?;
        let _ = writeln!(out, "{},{}", fmt_f64(theta), fmt_f64(to_db(g)));
    }
    Ok(out)
}

pub struct GainPatternArgs<'a> {
    pub model: &'a str,
    pub phi: f64,
    pub step: f64,
    pub result: Option<&'a Path>,
    pub column: usize,
    pub output: Option<&'a str>,
}

pub fn gain_pattern(scene: &Scene, args: &GainPatternArgs, out: &Path) -> CliResult<Vec<PathBuf>> {
    let (resolved, v) = match args.result {
        None => {
            let r = scene.model(args.model, None)?;
            let v = r.v_tx.clone();
            (r, v)
        }
        Some(path) => {
            let shown = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|e| user(format!("cannot read {shown}: {e}")))?;
            let res = BeamformResult::from_text(&text).map_err(|e| user(format!("{shown}: {e}")))?;
            if args.column >= res.t.ncols() {
                return Err(user(format!("{shown}: precoder has {} columns", res.t.ncols())));
            }
            let r = scene.model(args.model, Some(&res.z_indices))?;
            let v: CVector = res.t.column(args.column).into_owned();
            if v.len() != r.model.n_tx() {
                return Err(user(format!(
                    "{shown}: precoder has {} rows for {} PAs",
                    v.len(),
                    r.model.n_tx()
                )));
            }
            (r, v)
        }
    };
    let ops = resolved.model.build_gain_operators()?;
    let csv = gain_slice_csv(&ops, resolved.model.frontend().z_tx(), &v, args.phi, args.step)?;
    let name = args
        .output
        .map(str::to_string)
        .unwrap_or_else(|| format!("{}_gain_pattern.csv", args.model));
    Ok(vec![write_atomic(out, &name, &csv)?])
}

pub fn optimize(scene: &Scene, problem: &str, seed: Option<u64>, step: f64, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut setup = scene.problem(problem)?;
    if let Some(seed) = seed {
        setup.problem.seed = seed;
    }
    let r = setup.network.r();
    let result = coordinate_ascent(&setup.problem, r, |z: &[usize]| setup.build(z))?;
    log::info!(
        "{problem}: f_best {:.6e} after {} evaluations",
        result.f_best(),
        result.evaluations
    );
    let mut written = vec![write_atomic(
        out,
        &format!("{problem}_result.txt"),
        &result.to_text(&setup.problem.z_set),
    )?];
    let model = setup.build(&result.z_indices)?;
    let ops = model.build_gain_operators()?;
    for (u, d) in setup.problem.primary.iter().enumerate() {
        let v: CVector = result.t.column(u).into_owned();
        let csv = gain_slice_csv(&ops, model.frontend().z_tx(), &v, d.phi_deg(), step)?;
        written.push(write_atomic(out, &format!("{problem}_gain_u{u}.csv"), &csv)?);
    }
    Ok(written)
}
