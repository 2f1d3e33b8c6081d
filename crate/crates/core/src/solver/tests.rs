use std::sync::Arc;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::farfield::Direction;
use crate::network::TuningNetwork;
use crate::radiating::{hertzian_dipole, isotropic_radiator};
use crate::synth;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const F: f64 = 5.4e9;

fn grid(nt: usize, np: usize) -> Arc<DirectionGrid> {
    DirectionGrid::latlon(nt, np).unwrap().shared()
}

fn z_dipole_model(nt: usize, np: usize) -> RemsModel {
    let r = hertzian_dipole(Vector3::z(), Vector3::zeros(), grid(nt, np), F).unwrap();
    RemsModel::new(
        RfFrontend::matched(1, 0, 50.0).unwrap(),
        TuningNetwork::through(1),
        Arc::new(r),
    )
    .unwrap()
}

fn isotropic_model() -> RemsModel {
    let r = isotropic_radiator(grid(10, 20), F).unwrap();
    RemsModel::new(
        RfFrontend::matched(1, 0, 50.0).unwrap(),
        TuningNetwork::through(1),
        Arc::new(r),
    )
    .unwrap()
}

fn rel_diff(a: &CVector, b: &CVector) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

#[test]
fn through_chain_scales_the_dipole_pattern() {
    let model = z_dipole_model(8, 16);
    let ops = model.build_gain_operators().unwrap();
    let k = model.frontend().pa_blocks().k_vtx[0];
    let expected = model.radiating().tx_kernel() * k;
    assert!(linalg::max_abs(&(ops.g_vtx_af() - expected)) < 1e-16);
}

#[test]
fn loop_free_graph_has_unit_loop_inverses() {
    // Zero coupling and matched PAs: the transmit operator is a plain product.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = grid(8, 16);
    let r = hertzian_dipole(Vector3::x(), Vector3::zeros(), g, F).unwrap();
    let r = r.with_coupling(CMatrix::zeros(1, 1)).unwrap();
    let tuning = synth::random_tuning_network(&mut rng, 1, 1, 0.9, true).unwrap();
    let model = RemsModel::new(RfFrontend::matched(1, 0, 50.0).unwrap(), tuning, Arc::new(r)).unwrap();
    let ops = model.build_gain_operators().unwrap();
    let k = model.frontend().assemble_k_matrices();
    let expected = model.tuning().s_rt() * k.k_vtx;
    assert!(linalg::max_abs(&(ops.vtx_port_waves() - expected)) < 1e-15);
}

#[test]
fn zero_inputs_give_zero_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = synth::random_model(&mut rng, grid(8, 16), F, 2, 1, 3).unwrap();
    let s = solve_direct(&model, &Inputs::zeros(&model)).unwrap();
    assert!(s.a_t.iter().chain(s.b_r.iter()).chain(s.v_rx.iter()).all(|z| *z == c(0.0, 0.0)));
    assert_eq!(s.a_f.total_power(), 0.0);
}

#[test]
fn matched_through_chain_has_no_reflection() {
    let model = z_dipole_model(8, 16);
    let v = CVector::from_element(1, c(1.0, 0.0));
    let s = solve_direct(&model, &Inputs::transmit(&model, v)).unwrap();
    let k = model.frontend().pa_blocks().k_vtx[0];
    assert!((s.a_t[0] - k).norm() < 1e-16);
    assert!(s.b_t[0].norm() < 1e-16);
    assert!(s.residual < 1e-14);
}

#[test]
fn lna_noise_matches_node_analysis() {
    // LNA (Z = 50) through a matched line into a matched, non-coupled
    // antenna: the LNA sees a 50 ohm load. Node analysis gives
    // i = vg / (50 + 50) and v_Rx = -50 i.
    let r = hertzian_dipole(Vector3::z(), Vector3::zeros(), grid(8, 16), F).unwrap();
    let model = RemsModel::new(
        RfFrontend::matched(0, 1, 50.0).unwrap(),
        TuningNetwork::through(1),
        Arc::new(r),
    )
    .unwrap();
    let vg = c(0.3, -0.4);
    let mut inputs = Inputs::zeros(&model);
    inputs.v_gamma[0] = vg;
    let s = solve_direct(&model, &inputs).unwrap();
    assert!((s.v_rx[0] - (-vg / 2.0)).norm() < 1e-15);
    let ops = model.build_gain_operators().unwrap();
    assert!((ops.evaluate(&inputs).unwrap().v_rx[0] - s.v_rx[0]).norm() < 1e-15);
}

#[test]
fn operators_agree_with_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = grid(8, 16);
    for trial in 0..20 {
        let n_tx = 1 + trial % 3;
        let n_rx = trial % 2 + usize::from(trial % 5 == 0);
        let m = 1 + trial % 4;
        let model = synth::random_model(&mut rng, g.clone(), F, n_tx, n_rx, m).unwrap();
        let ops = model.build_gain_operators().unwrap();
        let inputs = synth::random_inputs(&mut rng, &model, true);
        let direct = solve_direct(&model, &inputs).unwrap();
        assert!(direct.residual < 1e-12, "residual {}", direct.residual);
        let out = ops.evaluate(&inputs).unwrap();
        assert!(rel_diff(&out.v_rx, &direct.v_rx) < 1e-10, "trial {trial}");
        // Noise reaches a_f only through the direct solve.
        let quiet = synth::random_inputs(&mut rng, &model, false);
        let direct = solve_direct(&model, &quiet).unwrap();
        let out = ops.evaluate(&quiet).unwrap();
        assert!(rel_diff(&out.a_f.to_vector(), &direct.a_f.to_vector()) < 1e-10);
    }
}

#[test]
fn individual_operators_match_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = synth::random_model(&mut rng, grid(8, 16), F, 2, 2, 3).unwrap();
    let ops = model.build_gain_operators().unwrap();
    let zero = Inputs::zeros(&model);
    let check = |inputs: &Inputs, v_rx: CVector| {
        let d = solve_direct(&model, inputs).unwrap();
        assert!(rel_diff(&v_rx, &d.v_rx) < 1e-10);
    };
    let mut i = zero.clone();
    i.v_upsilon = synth::random_vector(&mut rng, 3);
    check(&i, ops.g_vupsilon_vrx() * &i.v_upsilon);
    let mut i = zero.clone();
    i.i_gamma = synth::random_vector(&mut rng, 2);
    check(&i, ops.g_igamma_vrx() * &i.i_gamma);
    let mut i = zero.clone();
    i.v_gamma = synth::random_vector(&mut rng, 2);
    check(&i, ops.g_vgamma_vrx() * &i.v_gamma);
    let mut i = zero.clone();
    i.b_f = synth::random_pattern(&mut rng, model.grid().clone());
    check(&i, ops.g_bf_vrx() * i.b_f.to_vector());
    let d = solve_direct(&model, &i).unwrap();
    let a_f = ops.apply_bf_af(&i.b_f).unwrap();
    assert!(rel_diff(&a_f.to_vector(), &d.a_f.to_vector()) < 1e-10);
}

#[test]
fn extrinsic_noise_can_be_disabled() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = synth::random_model(&mut rng, grid(8, 16), F, 1, 1, 2).unwrap();
    let quiet = RemsModel::new(
        model.frontend().clone(),
        model.tuning().clone(),
        Arc::new((**model.radiating()).clone().with_extrinsic_noise(false)),
    )
    .unwrap();
    let mut i = Inputs::zeros(&quiet);
    i.v_upsilon = synth::random_vector(&mut rng, 2);
    assert_eq!(solve_direct(&quiet, &i).unwrap().v_rx[0], c(0.0, 0.0));
    let ops = quiet.build_gain_operators().unwrap();
    assert_eq!(ops.g_vupsilon_vrx(), &CMatrix::zeros(1, 2));
}

#[test]
fn evaluate_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = synth::random_model(&mut rng, grid(8, 16), F, 2, 1, 2).unwrap();
    let ops = model.build_gain_operators().unwrap();
    let x = synth::random_inputs(&mut rng, &model, true);
    let y = synth::random_inputs(&mut rng, &model, true);
    let sum = ops.evaluate(&x.add(&y).unwrap()).unwrap();
    let ox = ops.evaluate(&x).unwrap();
    let oy = ops.evaluate(&y).unwrap();
    assert!(rel_diff(&sum.v_rx, &(&ox.v_rx + &oy.v_rx)) < 1e-13);
    assert!(rel_diff(&sum.a_f.to_vector(), &(ox.a_f.to_vector() + oy.a_f.to_vector())) < 1e-13);
}

#[test]
fn shape_mismatch_is_reported() {
    let model = z_dipole_model(8, 16);
    let ops = model.build_gain_operators().unwrap();
    let mut i = Inputs::zeros(&model);
    i.v_tx = CVector::zeros(2);
    assert!(matches!(ops.evaluate(&i), Err(Error::DimensionMismatch { .. })));
    let mut i = Inputs::zeros(&model);
    i.b_f = FarFieldPattern::zeros(grid(6, 12));
    assert!(matches!(solve_direct(&model, &i), Err(Error::GridMismatch)));
}

#[test]
fn resonant_loop_is_named() {
    // A lossless tuning network that reflects everything back into a
    // radiating port with unit reflection closes a unit-gain loop.
    let r = hertzian_dipole(Vector3::z(), Vector3::zeros(), grid(8, 16), F).unwrap();
    let r = r.with_coupling(CMatrix::identity(1, 1)).unwrap();
    let mut s = CMatrix::zeros(2, 2);
    s[(0, 0)] = c(1.0, 0.0);
    s[(1, 1)] = c(1.0, 0.0);
    let model = RemsModel::new(
        RfFrontend::matched(1, 0, 50.0).unwrap(),
        TuningNetwork::new(s, 1).unwrap(),
        Arc::new(r),
    )
    .unwrap();
    match model.build_gain_operators() {
        Err(Error::IllConditioned { context, .. }) => assert!(context.contains("L2")),
        other => panic!("expected a loop diagnostic, got {other:?}"),
    }
}

#[test]
fn power_metrics_of_trivial_states() {
    let model = z_dipole_model(8, 16);
    let s = solve_direct(&model, &Inputs::zeros(&model)).unwrap();
    assert_eq!(power_metrics(&s), PowerMetrics { p_t: 0.0, p_r: 0.0, p_f: 0.0 });

    // Total reflection at the tuning network input.
    let mut t = CMatrix::zeros(2, 2);
    t[(0, 0)] = c(0.0, 1.0);
    let model = RemsModel::new(
        model.frontend().clone(),
        TuningNetwork::new(t, 1).unwrap(),
        model.radiating().clone(),
    )
    .unwrap();
    let s = solve_direct(&model, &Inputs::transmit(&model, CVector::from_element(1, c(1.0, 0.0)))).unwrap();
    assert!(power_metrics(&s).p_t.abs() < 1e-18);
}

#[test]
fn matched_dipole_chain_power() {
    let model = z_dipole_model(36, 72);
    let s = solve_direct(&model, &Inputs::transmit(&model, CVector::from_element(1, c(1.0, 0.0)))).unwrap();
    let p = power_metrics(&s);
    assert!((p.p_t - 5e-3).abs() < 1e-15);
    assert!((p.p_r - 5e-3).abs() < 1e-15);
    assert!((p.p_f - 5e-3).abs() < 5e-3 * 1e-3);
}

#[test]
fn available_power_examples() {
    let one = CVector::from_element(1, c(1.0, 0.0));
    assert!((available_power(&one, &[c(50.0, 0.0)]).unwrap() - 5e-3).abs() < 1e-18);
    assert_eq!(available_power(&CVector::zeros(1), &[c(50.0, 0.0)]).unwrap(), 0.0);
    assert!(available_power(&one, &[c(0.0, 5.0)]).is_err());
}

#[test]
fn conjugate_match_delivers_available_power() {
    let z = c(30.0, 40.0);
    let r0 = 50.0;
    let gamma = (z.conj() - r0) / (z.conj() + r0);
    let mut s = CMatrix::zeros(2, 2);
    s[(0, 0)] = gamma;
    let r = isotropic_radiator(grid(6, 12), F).unwrap();
    let model = RemsModel::new(
        RfFrontend::new(vec![z], vec![], r0).unwrap(),
        TuningNetwork::new(s, 1).unwrap(),
        Arc::new(r),
    )
    .unwrap();
    let v = CVector::from_element(1, c(0.7, -1.1));
    let st = solve_direct(&model, &Inputs::transmit(&model, v.clone())).unwrap();
    let p_a = available_power(&v, &[z]).unwrap();
    assert!((power_metrics(&st).p_t - p_a).abs() < 1e-12 * p_a);
}

#[test]
fn isotropic_reference_has_unit_gain() {
    let model = isotropic_model();
    let v = CVector::from_element(1, c(1.0, 0.0));
    for &d in model.grid().directions().iter().step_by(7) {
        assert!((rems_gain(&model, &v, d).unwrap() - 1.0).abs() < 1e-13);
    }
    let off = Direction::from_degrees(33.3, 71.0);
    assert!((rems_gain(&model, &v, off).unwrap() - 1.0).abs() < 1e-13);
    assert!(rems_gain(&model, &CVector::zeros(1), off).is_err());
}

#[test]
fn dipole_broadside_gain() {
    let model = z_dipole_model(9, 18);
    let v = CVector::from_element(1, c(2.0, 1.0));
    for phi in [0.0, 45.0, 200.0] {
        let g = rems_gain(&model, &v, Direction::from_degrees(90.0, phi)).unwrap();
        assert!((g - 1.5).abs() < 1e-13, "{g}");
    }
    assert!((to_db(1.5) - 1.760_912_590_556_812_5).abs() < 1e-12);
}

#[test]
fn efficiencies_of_reference_chain() {
    let model = isotropic_model();
    let v = CVector::from_element(1, c(1.0, 0.0));
    let e = efficiencies(&model, &v).unwrap();
    assert!((e.eta_matching - 1.0).abs() < 1e-13);
    assert!((e.eta_tuning - 1.0).abs() < 1e-13);
    assert!((e.eta_radiating - 1.0).abs() < 1e-12);
}

#[test]
fn attenuator_halves_tuning_efficiency() {
    let a = c(0.5f64.sqrt(), 0.0);
    let mut s = CMatrix::zeros(2, 2);
    s[(0, 1)] = a;
    s[(1, 0)] = a;
    let base = isotropic_model();
    let model = RemsModel::new(
        base.frontend().clone(),
        TuningNetwork::new(s, 1).unwrap(),
        base.radiating().clone(),
    )
    .unwrap();
    let e = efficiencies(&model, &CVector::from_element(1, c(1.0, 0.0))).unwrap();
    assert!((e.eta_tuning - 0.5).abs() < 1e-12);
}

#[test]
fn undefined_stage_is_reported() {
    let mut s = CMatrix::zeros(2, 2);
    s[(0, 0)] = c(1.0, 0.0);
    let base = isotropic_model();
    let model = RemsModel::new(
        base.frontend().clone(),
        TuningNetwork::new(s, 1).unwrap(),
        base.radiating().clone(),
    )
    .unwrap();
    let err = efficiencies(&model, &CVector::from_element(1, c(1.0, 0.0))).unwrap_err();
    assert!(matches!(err, Error::UndefinedStage("tuning")));
}

#[test]
fn efficiency_chain_equals_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = grid(8, 16);
    for _ in 0..10 {
        let model = synth::random_model(&mut rng, g.clone(), F, 2, 0, 3).unwrap();
        let v = synth::random_vector(&mut rng, 2);
        let e = efficiencies(&model, &v).unwrap();
        for &d in g.directions().iter().step_by(11) {
            let gain = rems_gain(&model, &v, d).unwrap();
            assert!((e.chain_gain(d) - gain).abs() <= 1e-10 * gain.max(1e-3));
        }
    }
}

#[test]
fn noise_covariance_examples() {
    let r = hertzian_dipole(Vector3::z(), Vector3::zeros(), grid(8, 16), F).unwrap();
    let model = RemsModel::new(
        RfFrontend::matched(0, 1, 50.0).unwrap(),
        TuningNetwork::through(1),
        Arc::new(r),
    )
    .unwrap();
    let ops = model.build_gain_operators().unwrap();
    let zero = noise_covariance(&ops, &NoiseCovariance::zeros(1, 1)).unwrap();
    assert_eq!(zero, CMatrix::zeros(1, 1));
    let mut cov = NoiseCovariance::zeros(1, 1);
    cov.v_gamma = CMatrix::identity(1, 1);
    let out = noise_covariance(&ops, &cov).unwrap();
    // v_Rx = -v_G / 2 on this chain.
    assert!((out[(0, 0)] - c(0.25, 0.0)).norm() < 1e-15);
    cov.v_gamma[(0, 0)] = c(-1.0, 0.0);
    assert!(noise_covariance(&ops, &cov).is_err());
}

#[test]
fn noise_covariance_stays_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = synth::random_model(&mut rng, grid(8, 16), F, 1, 3, 3).unwrap();
    let ops = model.build_gain_operators().unwrap();
    for _ in 0..20 {
        let a = synth::random_matrix(&mut rng, 6, 6);
        let joint = &a * a.adjoint();
        let u = synth::random_matrix(&mut rng, 3, 3);
        let cov = NoiseCovariance {
            v_gamma: linalg::block(&joint, 0, 0, 3, 3),
            cross: Some(linalg::block(&joint, 0, 3, 3, 3)),
            i_gamma: linalg::block(&joint, 3, 3, 3, 3),
            v_upsilon: &u * u.adjoint(),
        };
        let out = noise_covariance(&ops, &cov).unwrap();
        assert!(linalg::is_hermitian_psd(&out, 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn available_power_bounds_accepted_power(seed in any::<u64>(), n_tx in 1usize..4, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = synth::random_model(&mut rng, grid(6, 12), F, n_tx, 0, m).unwrap();
        let v = synth::random_vector(&mut rng, n_tx);
        let st = solve_direct(&model, &Inputs::transmit(&model, v.clone())).unwrap();
        let p = power_metrics(&st);
        let p_a = available_power(&v, model.frontend().z_tx()).unwrap();
        prop_assert!(p.p_t <= p_a + 1e-12);
        prop_assert!(p.p_r <= p.p_t + 1e-12);
        prop_assert!(p.p_f <= p.p_r + 1e-12);
    }

    #[test]
    fn gain_is_invariant_to_global_scale(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = synth::random_model(&mut rng, grid(6, 12), F, 2, 0, 2).unwrap();
        let v = synth::random_vector(&mut rng, 2);
        let d = Direction::from_degrees(50.0, 10.0);
        let g0 = rems_gain(&model, &v, d).unwrap();
        let g1 = rems_gain(&model, &(&v * c(re, im)), d).unwrap();
        prop_assert!((g0 - g1).abs() <= 1e-12 * g0.max(1e-12));
    }
}
