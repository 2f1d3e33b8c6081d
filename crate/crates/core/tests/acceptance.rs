//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! run with `cargo test -p rems-core --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rems_core::beamform::{coordinate_ascent, evaluate_configuration, h_co, BeamformProblem, CoPolarization};
use rems_core::channel::{far_channel, Placement};
use rems_core::constants::{free_space_impedance, wavelength, wavenumber};
use rems_core::linalg;
use rems_core::network::touchstone::{self, DataFormat, FrequencyUnit, Touchstone};
use rems_core::radiating::io::{parse_responses, write_responses};
use rems_core::radiating::{
    dipole_array, extract_rx_kernel, extract_scatter_kernel, hertzian_dipole, isotropic_radiator,
    simulate_responses, ArrayModel, DipoleElement, Polarization, PlaneWaveResponseSet,
};
use rems_core::solver::{
    available_power, efficiencies, power_metrics, rems_gain, rems_gain_with, solve_direct, to_db, Inputs,
};
use rems_core::{synth, CMatrix, CVector, Direction, DirectionGrid, RemsModel, RfFrontend, TuningNetwork, C64};

const F: f64 = 5.4e9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn grid(nt: usize, np: usize) -> Arc<DirectionGrid> {
    DirectionGrid::latlon(nt, np).unwrap().shared()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Outcome {
    check(elapsed < limit, format!("{what} took {elapsed:.2?} (limit {limit:.0?})"))
}

fn rel_diff(a: &CVector, b: &CVector) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

fn single_port_model(r: rems_core::RadiatingStructure) -> RemsModel {
    RemsModel::new(
        RfFrontend::matched(1, 0, 50.0).unwrap(),
        TuningNetwork::through(1),
        Arc::new(r),
    )
    .unwrap()
}

fn friis() -> Outcome {
    let start = Instant::now();
    let g = grid(37, 72);
    let a = hertzian_dipole(Vector3::z(), Vector3::zeros(), g.clone(), F).map_err(|e| e.to_string())?;
    let b = hertzian_dipole(Vector3::z(), Vector3::zeros(), g, F).map_err(|e| e.to_string())?;
    let s_at = |d: f64| -> f64 {
        let p = Placement::new(d, Vector3::x()).unwrap();
        far_channel(&a, &b, &p).unwrap().s21[(0, 0)].norm()
    };
    let s5 = s_at(5.0);
    let expected = 3.0 * wavelength(F) / (8.0 * PI * 5.0);
    let rel = (s5 - expected).abs() / expected;
    check(rel < 1e-6, format!("|S21| at 5 m = {s5:.6e}, Friis {expected:.6e}, rel err {rel:.1e}"))?;
    check((expected - 1.3254e-3).abs() < 5e-8, format!("Friis reference {expected:.5e}"))?;

    let (xs, ys): (Vec<f64>, Vec<f64>) = (1..=100)
        .map(|d| ((d as f64).ln(), s_at(d as f64).ln()))
        .unzip();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    check((slope + 1.0).abs() < 1e-6, format!("log-log slope {slope:.9}"))?;
    within(start.elapsed(), Duration::from_secs(1), "Friis suite")?;
    Ok(format!("rel err {rel:.1e}, slope {slope:.9}, {:.2?}", start.elapsed()))
}

fn gain_operators() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = grid(18, 36);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.random_range(1..=4);
        let n_tx = rng.random_range(0..=n);
        let n_rx = n - n_tx;
        let m = rng.random_range(1..=6);
        let model = synth::random_model(&mut rng, g.clone(), F, n_tx, n_rx, m).map_err(|e| e.to_string())?;
        let ops = model.build_gain_operators().map_err(|e| e.to_string())?;
        for noise in [true, false] {
            let inputs = synth::random_inputs(&mut rng, &model, noise);
            let direct = solve_direct(&model, &inputs).map_err(|e| e.to_string())?;
            let out = ops.evaluate(&inputs).map_err(|e| e.to_string())?;
            if n_rx > 0 {
                worst = worst.max(rel_diff(&out.v_rx, &direct.v_rx));
            }
            // The operator far field carries no noise contributions.
            if !noise {
                worst = worst.max(rel_diff(&out.a_f.to_vector(), &direct.a_f.to_vector()));
            }
        }
        if worst >= 1e-10 {
            return Err(format!("model {trial} (N_Tx {n_tx}, N_Rx {n_rx}, M {m}): rel diff {worst:.1e}"));
        }
    }
    within(start.elapsed(), Duration::from_secs(30), "100 models")?;
    Ok(format!("100 models, worst rel diff {worst:.1e}, {:.2?}", start.elapsed()))
}

fn reciprocity() -> Outcome {
    let g = grid(18, 36);
    let lambda = wavelength(F);
    let analytic = [
        ("isotropic", isotropic_radiator(g.clone(), F)),
        ("z dipole", hertzian_dipole(Vector3::z(), Vector3::zeros(), g.clone(), F)),
        (
            "idealized pair",
            dipole_array(
                &[
                    DipoleElement::new(Vector3::x(), Vector3::new(0.0, 0.0, 0.2 * lambda)),
                    DipoleElement::new(Vector3::new(0.0, 0.6, 0.8), Vector3::new(0.3 * lambda, 0.0, 0.0)),
                ],
                g.clone(),
                F,
                ArrayModel::Idealized,
            ),
        ),
        (
            "lossless triple",
            dipole_array(
                &[
                    DipoleElement::new(Vector3::x(), Vector3::zeros()),
                    DipoleElement::new(Vector3::y(), Vector3::new(0.0, 0.4 * lambda, 0.0)),
                    DipoleElement::new(Vector3::z(), Vector3::new(0.0, 0.0, 0.35 * lambda)),
                ],
                g.clone(),
                F,
                ArrayModel::Lossless,
            ),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (name, s) in analytic {
        let s = s.map_err(|e| e.to_string())?;
        let rep = s.check_reciprocity(1e-12);
        worst = worst.max(rep.coupling_deviation).max(rep.kernel_deviation).max(rep.scatter_deviation);
        check(rep.all_ok(), format!("{name}: {rep:?}"))?;
    }
    let rra = synth::synthetic_rra(g.clone(), F, 4, 2, 50.0, synth::case_study_z_set()).map_err(|e| e.to_string())?;
    let rep = rra.radiating.check_reciprocity(1e-12);
    check(rep.all_ok(), format!("synthetic reflector array: {rep:?}"))?;
    worst = worst.max(rep.coupling_deviation).max(rep.kernel_deviation).max(rep.scatter_deviation);

    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst_pair: f64 = 0.0;
    for _ in 0..20 {
        let m1 = rng.random_range(1..=3);
        let m2 = rng.random_range(1..=3);
        let a = synth::random_radiating_structure(&mut rng, g.clone(), F, m1, 0.9).map_err(|e| e.to_string())?;
        let b = synth::random_radiating_structure(&mut rng, g.clone(), F, m2, 1.0).map_err(|e| e.to_string())?;
        let rot = Rotation3::from_euler_angles(rng.random(), rng.random(), rng.random());
        let b = b.rotated(&rot);
        let dir = Direction::new(rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI);
        let p = Placement::towards(0.6 + 2.4 * rng.random::<f64>(), dir).map_err(|e| e.to_string())?;
        let fwd = far_channel(&a, &b, &p).map_err(|e| e.to_string())?.s21;
        let rev = far_channel(&b, &a, &p.reversed()).map_err(|e| e.to_string())?.s21;
        let dev = linalg::max_abs(&(&fwd - rev.transpose())) / linalg::max_abs(&fwd);
        worst_pair = worst_pair.max(dev);
    }
    check(worst_pair < 1e-10, format!("far-channel swap deviation {worst_pair:.1e}"))?;
    Ok(format!("structure symmetry dev {worst:.1e}, channel swap dev {worst_pair:.1e}"))
}

fn power_accounting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let g = grid(6, 12);
    let mut worst_ratio: f64 = 0.0;
    for trial in 0..1000 {
        let n_tx = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let model = synth::random_model(&mut rng, g.clone(), F, n_tx, 0, m).map_err(|e| e.to_string())?;
        let v = synth::random_vector(&mut rng, n_tx);
        let p_a = available_power(&v, model.frontend().z_tx()).map_err(|e| e.to_string())?;
        let st = solve_direct(&model, &Inputs::transmit(&model, v)).map_err(|e| e.to_string())?;
        let p_t = power_metrics(&st).p_t;
        worst_ratio = worst_ratio.max(p_t / p_a);
        if p_t > p_a * (1.0 + 1e-12) {
            return Err(format!("model {trial}: P_T {p_t:e} exceeds P_A {p_a:e}"));
        }
    }

    // Conjugate-matched PA terminated directly by the tuning network.
    let z = C64::new(30.0, 40.0);
    let r0 = 50.0;
    let mut s = CMatrix::zeros(2, 2);
    s[(0, 0)] = (z.conj() - r0) / (z.conj() + r0);
    let model = RemsModel::new(
        RfFrontend::new(vec![z], vec![], r0).map_err(|e| e.to_string())?,
        TuningNetwork::new(s, 1).map_err(|e| e.to_string())?,
        Arc::new(isotropic_radiator(grid(6, 12), F).map_err(|e| e.to_string())?),
    )
    .map_err(|e| e.to_string())?;
    let v = CVector::from_element(1, C64::new(0.7, -1.1));
    let st = solve_direct(&model, &Inputs::transmit(&model, v.clone())).map_err(|e| e.to_string())?;
    let p_a = available_power(&v, &[z]).map_err(|e| e.to_string())?;
    let match_err = (power_metrics(&st).p_t - p_a).abs() / p_a;
    check(match_err < 1e-12, format!("conjugate match rel err {match_err:.1e}"))?;

    // Matched dipole driven at 1 V: P_A = 5 mW.
    let mut errors = Vec::new();
    for (nt, np) in [(9, 18), (18, 36), (36, 72), (72, 144)] {
        let model = single_port_model(
            hertzian_dipole(Vector3::z(), Vector3::zeros(), grid(nt, np), F).map_err(|e| e.to_string())?,
        );
        let v = CVector::from_element(1, C64::new(1.0, 0.0));
        let st = solve_direct(&model, &Inputs::transmit(&model, v)).map_err(|e| e.to_string())?;
        let p = power_metrics(&st);
        let p_a = 5e-3;
        check(
            (p.p_t - p_a).abs() < 1e-12 * p_a && (p.p_r - p_a).abs() < 1e-12 * p_a,
            format!("{nt}x{np}: P_T {:e}, P_R {:e}", p.p_t, p.p_r),
        )?;
        errors.push((p.p_f - p_a).abs() / p_a);
    }
    let errs = errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ");
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.iter().all(|r| *r >= 4.0),
        format!("quadrature errors [{errs}], reduction per doubling {ratios:.2?}"),
    )?;
    Ok(format!(
        "max P_T/P_A {worst_ratio:.6}, conjugate match {match_err:.1e}, quadrature errors [{errs}] (ratios {ratios:.4?})"
    ))
}

fn gain_sanity() -> Outcome {
    let iso = single_port_model(isotropic_radiator(grid(18, 36), F).map_err(|e| e.to_string())?);
    let v = CVector::from_element(1, C64::new(1.0, 0.0));
    let mut worst_iso: f64 = 0.0;
    for d in [Direction::from_degrees(0.0, 0.0), Direction::from_degrees(47.0, 131.0), Direction::from_degrees(90.0, 270.0)] {
        worst_iso = worst_iso.max(to_db(rems_gain(&iso, &v, d).map_err(|e| e.to_string())?).abs());
    }
    check(worst_iso < 1e-12, format!("isotropic gain {worst_iso:.1e} dB"))?;

    let dip = single_port_model(
        hertzian_dipole(Vector3::z(), Vector3::zeros(), grid(36, 72), F).map_err(|e| e.to_string())?,
    );
    let g_db = to_db(rems_gain(&dip, &v, Direction::from_degrees(90.0, 0.0)).map_err(|e| e.to_string())?);
    check((g_db - 1.76).abs() <= 0.02, format!("dipole broadside {g_db:.4} dB"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let g = grid(18, 36);
    let mut worst_chain: f64 = 0.0;
    for _ in 0..10 {
        let n_tx = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let model = synth::random_model(&mut rng, g.clone(), F, n_tx, 0, m).map_err(|e| e.to_string())?;
        let v = synth::random_vector(&mut rng, n_tx);
        let e = efficiencies(&model, &v).map_err(|e| e.to_string())?;
        let ops = model.build_gain_operators().map_err(|e| e.to_string())?;
        for &d in g.directions().iter().step_by(37) {
            let gain = rems_gain_with(&ops, model.frontend().z_tx(), &v, d).map_err(|e| e.to_string())?;
            worst_chain = worst_chain.max((e.chain_gain(d) - gain).abs() / gain.max(1e-3));
        }
    }
    check(worst_chain < 1e-10, format!("efficiency chain rel err {worst_chain:.1e}"))?;
    Ok(format!("isotropic {worst_iso:.1e} dB, dipole {g_db:.4} dB, chain rel err {worst_chain:.1e}"))
}

/// Port wave of a matched short dipole under a unit-RMS plane wave,
/// computed from the 3-D field vector.
fn dipole_plane_wave_response(el: &DipoleElement, from: Direction, pol: Polarization) -> C64 {
    let k = wavenumber(F);
    let q = match pol {
        Polarization::Theta => from.theta_hat(),
        Polarization::Phi => from.phi_hat(),
    };
    let open_circuit = el.orientation.dot(&q) * (3.0 / (8.0 * PI)).sqrt();
    let phase = C64::from_polar(1.0, k * from.unit_vector().dot(&el.position));
    let to_wave = C64::new(0.0, -2.0 * PI / (k * free_space_impedance().sqrt()));
    to_wave * phase * open_circuit
}

fn extraction() -> Outcome {
    let g = grid(18, 36);
    let lambda = wavelength(F);
    let els = [
        DipoleElement::new(Vector3::z(), Vector3::new(0.1 * lambda, 0.0, 0.0)),
        DipoleElement::new(Vector3::new(0.6, 0.0, 0.8), Vector3::new(0.0, 0.3 * lambda, -0.1 * lambda)),
        DipoleElement::new(Vector3::y(), Vector3::new(-0.2 * lambda, 0.1 * lambda, 0.25 * lambda)),
    ];
    let s = dipole_array(&els, g.clone(), F, ArrayModel::Idealized).map_err(|e| e.to_string())?;
    let mut resp = PlaneWaveResponseSet::empty(F, g.clone(), els.len());
    for (dir, &d) in g.directions().iter().enumerate() {
        for pol in Polarization::BOTH {
            for (m, el) in els.iter().enumerate() {
                resp.set_port_wave(dir, pol, m, dipole_plane_wave_response(el, d, pol));
            }
        }
    }
    let resp = parse_responses(&write_responses(&resp)).map_err(|e| e.to_string())?;
    let rx = extract_rx_kernel(&resp).map_err(|e| e.to_string())?;
    let kernel_err = linalg::max_abs(&(&rx - s.rx_kernel())).max(linalg::max_abs(&(&rx - s.tx_kernel())));
    check(kernel_err < 1e-10, format!("tx/rx kernel deviation {kernel_err:.1e}"))?;

    let sg = grid(10, 20);
    let lossless = dipole_array(
        &[
            DipoleElement::new(Vector3::x(), Vector3::zeros()),
            DipoleElement::new(Vector3::new(0.0, 0.6, 0.8), Vector3::new(0.0, 0.0, 0.4 * lambda)),
        ],
        sg.clone(),
        F,
        ArrayModel::Lossless,
    )
    .map_err(|e| e.to_string())?;
    let resp = simulate_responses(&lossless, true);
    let resp = parse_responses(&write_responses(&resp)).map_err(|e| e.to_string())?;
    let x = extract_scatter_kernel(&resp).map_err(|e| e.to_string())?;
    let n = 2 * sg.len();
    let dense = lossless.scatter_kernel().to_dense(n);
    let scatter_err = linalg::max_abs(&(x.to_dense(n) - &dense)) / linalg::max_abs(&dense);
    check(scatter_err < 1e-10, format!("scatter kernel rel deviation {scatter_err:.1e}"))?;
    Ok(format!("kernel dev {kernel_err:.1e}, scatter rel dev {scatter_err:.1e}"))
}

fn beamforming() -> Outcome {
    let start = Instant::now();
    let g = grid(18, 36);
    let z_set = synth::case_study_z_set();
    let rra = synth::synthetic_rra(g, F, 4, 2, 50.0, z_set.clone()).map_err(|e| e.to_string())?;
    let problem = BeamformProblem {
        primary: vec![Direction::from_degrees(15.0, 90.0)],
        secondary: vec![Direction::from_degrees(30.0, 90.0)],
        z_set,
        z_init: 16,
        sigma_schedule: synth::case_study_sigma_schedule(),
        q_co: CoPolarization::Azimuthal,
        seed: 1,
    };
    let r = rra.n_reflectors();
    check(r == 16 && problem.z_set.len() == 32 && problem.i_max() == 10, "problem size".into())?;
    let builder = |z: &[usize]| rra.model(z);
    let res = coordinate_ascent(&problem, r, builder).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let again = coordinate_ascent(&problem, r, builder).map_err(|e| e.to_string())?;
    check(res == again, "repeated seeded run differs".into())?;
    check(
        !res.f_trace.is_empty() && res.f_trace.windows(2).all(|w| w[1] > w[0]),
        format!("f_trace not strictly increasing: {:?}", res.f_trace),
    )?;

    let model = rra.model(&res.z_indices).map_err(|e| e.to_string())?;
    let ops = model.build_gain_operators().map_err(|e| e.to_string())?;
    let h = h_co(&ops, &problem.primary, &problem.q_co);
    let zf_err = linalg::max_abs(&(&h * &res.t - CMatrix::identity(1, 1)));
    check(zf_err < 1e-10, format!("ZF residual {zf_err:.1e}"))?;

    let gains_db = |z: &[usize], t: &CMatrix| -> Result<(f64, f64), String> {
        let m = rra.model(z).map_err(|e| e.to_string())?;
        let ops = m.build_gain_operators().map_err(|e| e.to_string())?;
        let v: CVector = t.column(0).into_owned();
        let at = |d| rems_gain_with(&ops, m.frontend().z_tx(), &v, d).map(to_db).map_err(|e| e.to_string());
        Ok((at(problem.primary[0])?, at(problem.secondary[0])?))
    };
    let init = vec![problem.z_init; r];
    let t_init = evaluate_configuration(&builder, &init, &problem, problem.sigma_schedule[0])
        .map_err(|e| e.to_string())?
        .t;
    let (p0, s0) = gains_db(&init, &t_init)?;
    let (p1, s1) = gains_db(&res.z_indices, &res.t)?;
    let detail = format!(
        "primary {p0:.2} -> {p1:.2} dB (loss {:.2}), secondary {s0:.2} -> {s1:.2} dB (drop {:.2}), {} accepted steps, {elapsed:.2?}",
        p0 - p1,
        s0 - s1,
        res.f_trace.len()
    );
    check(s0 - s1 >= 10.0 && p0 - p1 <= 3.0, detail.clone())?;
    within(elapsed, Duration::from_secs(300), "coordinate ascent")?;
    Ok(detail)
}

fn touchstone_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut cases = 0;
    for n in 1..=4 {
        for format in [DataFormat::Ri, DataFormat::Ma, DataFormat::Db] {
            let data: Vec<(f64, CMatrix)> = (0..4)
                .map(|i| (1e9 * (1.0 + i as f64 * 0.37), synth::random_passive_matrix(&mut rng, n, 0.99, false)))
                .collect();
            let ts = Touchstone::from_matrices(FrequencyUnit::GHz, format, 50.0, &data).map_err(|e| e.to_string())?;
            let text = ts.write();
            let back = touchstone::parse(&text, n).map_err(|e| e.to_string())?;
            check(back == ts, format!("{n}-port {format:?}: parsed data differs"))?;
            for i in 0..data.len() {
                check(back.matrix(i) == ts.matrix(i), format!("{n}-port {format:?}: matrix {i} differs"))?;
            }
            if format == DataFormat::Ri {
                for (i, (_, s)) in data.iter().enumerate() {
                    check(&back.matrix(i) == s, format!("{n}-port RI: matrix {i} not bit-exact"))?;
                }
            }
            check(back.write() == text, format!("{n}-port {format:?}: rewrite differs"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} port/format combinations bit-exact"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("1 Friis equivalence", friis),
        ("2 gain operators vs direct solve", gain_operators),
        ("3 reciprocity", reciprocity),
        ("4 power accounting", power_accounting),
        ("5 REMS gain sanity", gain_sanity),
        ("6 extraction round trip", extraction),
        ("7 beam- and nullforming", beamforming),
        ("8 Touchstone round trip", touchstone_round_trip),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
