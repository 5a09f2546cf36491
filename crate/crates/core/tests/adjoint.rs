mod common;

use common::*;
use fvw::adjoint::dump::{block, TapeDump};
use fvw::adjoint::*;
use fvw::control::ObjectiveConfig;
use fvw::model::{InflowScenario, StateVector, WakeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fd_step_jacobian(model: &WakeModel, state: &StateVector, m: &[f64], eps: f64) -> (DenseMatrix, DenseMatrix) {
    let cfg = model.config();
    let inflow = InflowScenario::unit();
    let q = state.to_flat(cfg);
    let ns = q.len();
    let eval = |q: &[f64], m: &[f64]| {
        let s = StateVector::from_flat(cfg, q).unwrap();
        model.step(&s, m, &inflow, 3).unwrap().to_flat(cfg)
    };
    let mut fq = DenseMatrix::zeros(ns, ns);
    for c in 0..ns {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[c] += eps;
        qm[c] -= eps;
        let (fp, fm) = (eval(&qp, m), eval(&qm, m));
        for r in 0..ns {
            fq.set(r, c, (fp[r] - fm[r]) / (2.0 * eps));
        }
    }
    let mut fmat = DenseMatrix::zeros(ns, m.len());
    for c in 0..m.len() {
        let mut mp = m.to_vec();
        let mut mm = m.to_vec();
        mp[c] += eps;
        mm[c] -= eps;
        let (fp, fm) = (eval(&q, &mp), eval(&q, &mm));
        for r in 0..ns {
            fmat.set(r, c, (fp[r] - fm[r]) / (2.0 * eps));
        }
    }
    (fq, fmat)
}

fn max_matrix_err(a: &DenseMatrix, b: &DenseMatrix, floor: f64) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for r in 0..a.rows {
        for c in 0..a.cols {
            let e = rel_err(a.get(r, c), b.get(r, c), floor);
            if e > worst.0 {
                worst = (e, r, c);
            }
        }
    }
    worst
}

#[test]
fn dense_step_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for cfg in [tiny_2d(4), tiny_3d()] {
        let model = WakeModel::new(cfg).unwrap();
        let state = generic_state(&model, &mut rng);
        let m = random_controls(&mut rng);
        let jac = step_jacobians(&model, &state, &m).unwrap();
        assert_eq!(jac.diagnostics.degenerate_pairs, 0);
        let (fq, fm) = fd_step_jacobian(&model, &state, &m, 1e-6);
        let (e, r, c) = max_matrix_err(&jac.df_dq, &fq, 1e-8);
        assert!(
            e <= 1e-6,
            "df/dq entry ({r}, {c}): {} vs {}",
            jac.df_dq.get(r, c),
            fq.get(r, c)
        );
        let (e, r, c) = max_matrix_err(&jac.df_dm, &fm, 1e-8);
        assert!(
            e <= 1e-6,
            "df/dm entry ({r}, {c}): {} vs {}",
            jac.df_dm.get(r, c),
            fm.get(r, c)
        );
    }
}

#[test]
fn jacobian_block_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for cfg in [tiny_2d(4), tiny_3d()] {
        let model = WakeModel::new(cfg.clone()).unwrap();
        let state = generic_state(&model, &mut rng);
        let m = random_controls(&mut rng);
        let jac = step_jacobians(&model, &state, &m).unwrap();
        let f = &jac.df_dq;
        let ns = cfg.state_size();
        let (u0, m0) = (cfg.u_offset(), cfg.m_offset());
        for r in 0..ns {
            for c in 0..ns {
                let v = f.get(r, c);
                // stored free stream depends on nothing but the previous free stream
                if r >= u0 && r < m0 && !(c >= u0 && c < m0) {
                    assert_eq!(v, 0.0);
                }
                // saved controls and the new ring's positions and inflow do not depend on the state
                if r >= m0 || r < cfg.x_index(1, 0) || (r >= u0 && r < cfg.u_index(1, 0)) {
                    assert_eq!(v, 0.0, "row {r} col {c}");
                }
                // convected positions never depend on saved controls
                if r < cfg.gamma_offset() && c >= m0 {
                    assert_eq!(v, 0.0);
                }
            }
        }
        for r in 0..ns {
            for c in 0..cfg.n_controls() {
                let v = jac.df_dm.get(r, c);
                if r >= m0 {
                    assert_eq!(v, if r - m0 == c { 1.0 } else { 0.0 });
                } else if r >= cfg.x_index(1, 0) && !(r >= cfg.gamma_offset() && r < cfg.gamma_index(1, 0)) {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
}

#[test]
fn zero_circulation_jacobian_is_shift_plus_advection() {
    let cfg = tiny_2d(4);
    let model = WakeModel::new(cfg.clone()).unwrap();
    let state = model
        .empty_state(&[0.3, 0.0, 0.3, 0.0], &InflowScenario::unit())
        .unwrap();
    let jac = step_jacobians(&model, &state, &[0.3, 0.0, 0.3, 0.0]).unwrap();
    let h = cfg.time_step;
    for b in 1..cfg.rings {
        for i in 0..cfg.points_per_ring() {
            for d in 0..2 {
                let r = cfg.x_index(b, i) + d;
                for c in 0..cfg.gamma_offset() {
                    let expect = if c == cfg.x_index(b - 1, i) + d { 1.0 } else { 0.0 };
                    assert_eq!(jac.df_dq.get(r, c), expect);
                }
                assert_eq!(jac.df_dq.get(r, cfg.u_index(b - 1, i) + d), h);
            }
        }
    }
}

fn fd_output_jacobian(model: &WakeModel, state: &StateVector, eps: f64) -> DenseMatrix {
    let cfg = model.config();
    let q = state.to_flat(cfg);
    let mut out = DenseMatrix::zeros(cfg.n_t(), q.len());
    for c in 0..q.len() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[c] += eps;
        qm[c] -= eps;
        let yp = model.output(&StateVector::from_flat(cfg, &qp).unwrap()).unwrap();
        let ym = model.output(&StateVector::from_flat(cfg, &qm).unwrap()).unwrap();
        for t in 0..cfg.n_t() {
            out.set(t, c, (yp[t] - ym[t]) / (2.0 * eps));
        }
    }
    out
}

#[test]
fn output_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for cfg in [tiny_2d(5), tiny_3d()] {
        let model = WakeModel::new(cfg).unwrap();
        let state = generic_state(&model, &mut rng);
        let jac = output_jacobian(&model, &state).unwrap();
        let fd = fd_output_jacobian(&model, &state, 1e-6);
        let (e, r, c) = max_matrix_err(&jac, &fd, 1e-9);
        assert!(e <= 1e-6, "({r}, {c}): {} vs {}", jac.get(r, c), fd.get(r, c));
    }
}

#[test]
fn output_row_vanishes_without_induction() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = tiny_2d(5);
    let model = WakeModel::new(cfg.clone()).unwrap();
    let mut state = generic_state(&model, &mut rng);
    state.saved_controls[2] = 0.0;
    let jac = output_jacobian(&model, &state).unwrap();
    for c in 0..cfg.state_size() {
        if c != cfg.m_index(1, 0) {
            assert_eq!(jac.get(1, c), 0.0, "column {c}");
        }
    }
    assert!(jac.get(1, cfg.m_index(1, 0)) > 0.0);
}

#[test]
fn yaw_sensitivity_vanishes_on_symmetric_wake() {
    for cfg in [fvw::ModelConfig::reference_2d(), tiny_3d()] {
        let mut cfg = cfg;
        cfg.turbines[1].position = [5.0, 0.0, 0.0];
        let model = WakeModel::new(cfg.clone()).unwrap();
        let controls = [0.33, 0.0, 0.33, 0.0];
        let state = model
            .spin_up(&InflowScenario::unit(), &controls, 2 * cfg.rings)
            .unwrap();
        let jac = output_jacobian(&model, &state).unwrap();
        for t in 0..2 {
            let v = jac.get(t, cfg.m_index(t, 1));
            assert!(v.abs() <= 1e-8, "turbine {t}: dP/dpsi = {v}");
        }
    }
}

#[test]
fn backward_sweep_agrees_with_dense_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for cfg in [tiny_2d(4), tiny_3d()] {
        let model = WakeModel::new(cfg).unwrap();
        let state = generic_state(&model, &mut rng);
        let schedule = random_schedule(&mut rng, 5);
        let obj = both_free_objective(4);
        let inflow = InflowScenario::unit();
        let tape = forward_with_tape(&model, &state, &schedule, &inflow, 0, &obj).unwrap();
        let adj = backward_sweep(&model, &tape).unwrap();
        let n = tape.horizon();
        assert_eq!(adj.lambdas[n], tape.records[n].dj_dq);
        for k in 1..n {
            let rec = &tape.records[k];
            let jac = step_jacobians(&model, &rec.state, &rec.controls).unwrap();
            let dense = jac.df_dq.left_mul(&adj.lambdas[k + 1]);
            for (c, (a, b)) in adj.lambdas[k].iter().zip(dense.iter().zip(&rec.dj_dq)).enumerate() {
                let want = b.0 + b.1;
                assert!(rel_err(*a, want, 1e-12) <= 1e-10, "k {k} entry {c}: {a} vs {want}");
            }
        }
        assert!(adj.lambdas[0].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn adjoint_gradient_matches_finite_differences_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = WakeModel::new(tiny_2d(5)).unwrap();
    let state = generic_state(&model, &mut rng);
    let schedule = random_schedule(&mut rng, 9);
    let obj = both_free_objective(8);
    let inflow = InflowScenario::unit();
    let g = objective_gradient(&model, &state, &schedule, &inflow, 0, &obj).unwrap();
    let fd = finite_difference_gradient(&model, &state, &schedule, &inflow, 0, &obj, 1e-6).unwrap();
    let e = max_relative_error(&g.gradient, &fd, 1e-9);
    assert!(e <= 1e-4, "max rel err {e}\n{:?}\n{:?}", g.gradient, fd);
    assert_eq!(g.gradient.len(), 9);
}

#[test]
fn adjoint_gradient_matches_finite_differences_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = WakeModel::new(tiny_3d()).unwrap();
    let state = generic_state(&model, &mut rng);
    let schedule = random_schedule(&mut rng, 6);
    let obj = both_free_objective(5);
    let inflow = InflowScenario::rotating_default();
    let g = objective_gradient(&model, &state, &schedule, &inflow, 20, &obj).unwrap();
    let fd = finite_difference_gradient(&model, &state, &schedule, &inflow, 20, &obj, 1e-6).unwrap();
    let e = max_relative_error(&g.gradient, &fd, 1e-9);
    assert!(e <= 1e-4, "max rel err {e}\n{:?}\n{:?}", g.gradient, fd);
}

#[test]
fn zero_horizon_has_only_the_direct_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = WakeModel::new(tiny_2d(4)).unwrap();
    let state = generic_state(&model, &mut rng);
    let obj = both_free_objective(0);
    let m = random_controls(&mut rng);
    let tape = forward_with_tape(&model, &state, std::slice::from_ref(&m), &InflowScenario::unit(), 0, &obj).unwrap();
    assert_eq!(tape.records.len(), 1);
    let j0 = obj.stage_cost(&model.output(&state).unwrap(), &m, &state.saved_controls);
    assert_eq!(tape.total, j0);
    let adj = backward_sweep(&model, &tape).unwrap();
    let g = gradient(&model, &tape, &adj).unwrap();
    let direct = obj.move_cost_gradient(&m, &state.saved_controls);
    assert_eq!(g, vec![vec![direct[0], direct[1]]]);
}

#[test]
fn zero_objective_gives_zero_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = WakeModel::new(tiny_2d(4)).unwrap();
    let state = generic_state(&model, &mut rng);
    let obj = ObjectiveConfig {
        output_weights: vec![0.0, 0.0],
        move_weights: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        horizon: 4,
        free_controls: vec![0, 1],
    };
    let schedule = random_schedule(&mut rng, 5);
    let inflow = InflowScenario::unit();
    let tape = forward_with_tape(&model, &state, &schedule, &inflow, 0, &obj).unwrap();
    let adj = backward_sweep(&model, &tape).unwrap();
    assert!(adj.lambdas.iter().flatten().all(|&v| v == 0.0));
    let fd = finite_difference_gradient(&model, &state, &schedule, &inflow, 0, &obj, 1e-6).unwrap();
    assert!(fd.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn tape_outputs_equal_plain_forward_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = WakeModel::new(tiny_3d()).unwrap();
    let state = generic_state(&model, &mut rng);
    let m = random_controls(&mut rng);
    let schedule = vec![m.clone(); 4];
    let mut obj = both_free_objective(3);
    obj.move_weights = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let inflow = InflowScenario::unit();
    let tape = forward_with_tape(&model, &state, &schedule, &inflow, 0, &obj).unwrap();
    let mut s = state.clone();
    let mut pure_power = 0.0;
    for k in 0..4 {
        let y = model.output(&s).unwrap();
        assert_eq!(tape.records[k].outputs, y);
        pure_power -= y[0] + y[1];
        if k < 3 {
            s = model.step(&s, &m, &inflow, k).unwrap();
        }
    }
    assert!((tape.total - pure_power).abs() <= 1e-14);
}

#[test]
fn gradient_scales_with_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = WakeModel::new(tiny_2d(4)).unwrap();
    let state = generic_state(&model, &mut rng);
    let schedule = random_schedule(&mut rng, 5);
    let obj = both_free_objective(4);
    let inflow = InflowScenario::unit();
    let g1 = objective_gradient(&model, &state, &schedule, &inflow, 0, &obj).unwrap();
    let g3 = objective_gradient(&model, &state, &schedule, &inflow, 0, &obj.scaled(3.0)).unwrap();
    for (a, b) in g1.gradient.iter().flatten().zip(g3.gradient.iter().flatten()) {
        assert!(rel_err(3.0 * a, *b, 1e-14) <= 1e-12);
    }
}

#[test]
fn move_penalty_gradient_is_linear_in_the_ramp_slope() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let model = WakeModel::new(tiny_2d(4)).unwrap();
    let mut state = generic_state(&model, &mut rng);
    state.saved_controls = vec![0.3, 0.0, 0.3, 0.0];
    let obj = ObjectiveConfig {
        output_weights: vec![0.0, 0.0],
        move_weights: vec![vec![10.0]],
        horizon: 5,
        free_controls: vec![0],
    };
    let inflow = InflowScenario::unit();
    let ramp = |c: f64| -> Vec<Vec<f64>> { (0..6).map(|k| vec![0.3 + k as f64 * c, 0.0, 0.3, 0.0]).collect() };
    let g1 = objective_gradient(&model, &state, &ramp(0.01), &inflow, 0, &obj)
        .unwrap()
        .gradient;
    let g2 = objective_gradient(&model, &state, &ramp(0.02), &inflow, 0, &obj)
        .unwrap()
        .gradient;
    for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
        assert!((2.0 * a - b).abs() <= 1e-12, "{a} {b}");
    }
    // interior steps cancel, the final step keeps its own move
    assert!(g1[2][0].abs() < 1e-12);
    assert!((g1[5][0] - 2.0 * 10.0 * 0.01).abs() < 1e-12);
}

#[test]
fn finite_differences_are_step_robust() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let model = WakeModel::new(tiny_2d(4)).unwrap();
    let state = generic_state(&model, &mut rng);
    let schedule = random_schedule(&mut rng, 5);
    let obj = both_free_objective(4);
    let inflow = InflowScenario::unit();
    let a = finite_difference_gradient(&model, &state, &schedule, &inflow, 0, &obj, 1e-5).unwrap();
    let b = finite_difference_gradient(&model, &state, &schedule, &inflow, 0, &obj, 1e-6).unwrap();
    assert!(max_relative_error(&a, &b, 1e-9) <= 1e-5);
    assert!(finite_difference_gradient(&model, &state, &schedule, &inflow, 0, &obj, 0.0).is_err());
}

#[test]
fn injected_faults_are_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let model = WakeModel::new(tiny_2d(5)).unwrap();
    let state = generic_state(&model, &mut rng);
    let schedule = random_schedule(&mut rng, 8);
    let obj = both_free_objective(7);
    let inflow = InflowScenario::unit();
    let fd = finite_difference_gradient(&model, &state, &schedule, &inflow, 0, &obj, 1e-6).unwrap();
    let tape = forward_with_tape(&model, &state, &schedule, &inflow, 0, &obj).unwrap();
    for fault in [JacobianFault::DropCirculationCoupling, JacobianFault::DropShedCoupling] {
        let adj = backward_sweep_with(&model, &tape, Some(fault)).unwrap();
        let g = gradient(&model, &tape, &adj).unwrap();
        assert!(max_relative_error(&g, &fd, 1e-9) > 1e-3, "{fault:?} went unnoticed");
    }
}

#[test]
fn tape_dump_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let model = WakeModel::new(tiny_2d(3)).unwrap();
    let state = generic_state(&model, &mut rng);
    let schedule = random_schedule(&mut rng, 3);
    let obj = both_free_objective(2);
    let tape = forward_with_tape(&model, &state, &schedule, &InflowScenario::unit(), 7, &obj).unwrap();
    let dump = TapeDump::from_tape(&model, &tape, true).unwrap();
    let bytes = dump.encode();
    let back = TapeDump::decode(&bytes).unwrap();
    assert_eq!(back, dump);
    assert_eq!(back.steps[0].step, 7);
    let ns = model.config().state_size();
    let fq = back.find(0, block::DF_DQ).unwrap();
    assert_eq!((fq.rows, fq.cols), (ns, ns));
    assert!(back.find(2, block::DF_DQ).is_none());
    assert_eq!(back.find(1, block::OUTPUTS).unwrap().values, tape.records[1].outputs);
    for cut in [0, 9, 20, bytes.len() - 3] {
        assert!(TapeDump::decode(&bytes[..cut]).is_err());
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.bin");
    dump.write(&p).unwrap();
    assert_eq!(TapeDump::read(&p).unwrap(), dump);
}
