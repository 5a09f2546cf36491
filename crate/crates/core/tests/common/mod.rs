#![allow(dead_code)]

use fvw::control::ObjectiveConfig;
use fvw::model::{InflowScenario, ModelConfig, StateVector, WakeModel};
use rand::Rng;

/// Two-turbine configuration small enough for dense finite differences. The
/// virtual turbine sits close behind so the short wake reaches it.
pub fn tiny_2d(rings: usize) -> ModelConfig {
    let mut c = ModelConfig::reference_2d();
    c.rings = rings;
    c.turbines[1].position = [1.1, 0.1, 0.0];
    c
}

pub fn tiny_3d() -> ModelConfig {
    let mut c = ModelConfig::reference_3d();
    c.rings = 4;
    c.elements_per_ring = 6;
    c.turbines[1].position = [1.0, 0.1, 0.05];
    c
}

/// A generic (asymmetric, fully populated) state reached by stepping with
/// varying controls.
pub fn generic_state(model: &WakeModel, rng: &mut impl Rng) -> StateVector {
    let inflow = InflowScenario::Uniform {
        magnitude: 1.0,
        direction: 0.05,
    };
    let mut s = model.empty_state(&[0.3, 0.1, 0.3, 0.0], &inflow).unwrap();
    for k in 0..model.config().rings + 2 {
        let m = random_controls(rng);
        s = model.step(&s, &m, &inflow, k).unwrap();
    }
    s
}

/// Controls away from the kink of the thrust curve.
pub fn random_controls(rng: &mut impl Rng) -> Vec<f64> {
    vec![
        rng.gen_range(0.26..0.45),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(0.2..0.4),
        rng.gen_range(-0.3..0.3),
    ]
}

pub fn random_schedule(rng: &mut impl Rng, len: usize) -> Vec<Vec<f64>> {
    (0..len).map(|_| random_controls(rng)).collect()
}

pub fn both_free_objective(horizon: usize) -> ObjectiveConfig {
    ObjectiveConfig {
        output_weights: vec![-1.0, -1.0],
        move_weights: vec![vec![1.5, 0.2], vec![0.2, 0.4]],
        horizon,
        free_controls: vec![0, 1],
    }
}

/// Relative deviation with an absolute floor.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let d = (a - b).abs();
    if d <= floor {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}
