//! Horizon optimisation and the receding-horizon economic controller.

pub mod adam;
pub mod objective;
pub mod spectrum;

pub use adam::{adam_step, clamp_controls, update_schedule, AdamConfig, AdamMoments};
pub use objective::ObjectiveConfig;
pub use spectrum::dominant_frequency;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::{objective_gradient, objective_value, Diagnostics};
use crate::error::{FvwError, Result};
use crate::model::{InflowScenario, StateVector, WakeModel};

/// Outcome of optimising one horizon.
#[derive(Debug, Clone)]
pub struct HorizonResult {
    /// Best schedule encountered.
    pub schedule: Vec<Vec<f64>>,
    /// Objective of every iterate, starting with the initial schedule.
    pub history: Vec<f64>,
    pub best: f64,
    pub diagnostics: Diagnostics,
}

/// Run `iterations` Adam iterations on the free controls of `init`.
///
/// Moments start from zero. The best iterate is returned, since Adam does not
/// decrease the objective monotonically.
#[allow(clippy::too_many_arguments)]
pub fn optimize_horizon(
    model: &WakeModel,
    state: &StateVector,
    init: &[Vec<f64>],
    inflow: &InflowScenario,
    k0: usize,
    objective: &ObjectiveConfig,
    adam: &AdamConfig,
    iterations: usize,
) -> Result<HorizonResult> {
    adam.validate()?;
    let mut schedule = init.to_vec();
    let mut moments = AdamMoments::new(schedule.len() * objective.n_m());
    let mut history = Vec::with_capacity(iterations + 1);
    let mut best = (f64::INFINITY, schedule.clone());
    let mut diagnostics = Diagnostics::default();
    for _ in 0..iterations {
        let g = objective_gradient(model, state, &schedule, inflow, k0, objective)?;
        diagnostics.merge(g.diagnostics);
        history.push(g.objective);
        if g.objective < best.0 {
            best = (g.objective, schedule.clone());
        }
        update_schedule(adam, &mut schedule, &g.gradient, &objective.free_controls, &mut moments);
    }
    let last = objective_value(model, state, &schedule, inflow, k0, objective)?;
    history.push(last);
    if last < best.0 {
        best = (last, schedule);
    }
    Ok(HorizonResult {
        schedule: best.1,
        history,
        best: best.0,
        diagnostics,
    })
}

/// Drop the first entry and repeat the last one.
pub fn shift_schedule(schedule: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = schedule[1..].to_vec();
    out.push(schedule.last().expect("non-empty schedule").clone());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpcConfig {
    /// Number of implemented steps.
    pub steps: usize,
    /// Optimiser iterations per step.
    pub iterations: usize,
    /// Controls of the spin-up and of the first schedule.
    pub initial_controls: Vec<f64>,
    /// Spin-up length; three wake lengths when absent.
    pub spin_up_steps: Option<usize>,
    /// Virtual turbines yaw with the wind direction.
    pub virtual_yaw_tracks_wind: bool,
    /// Keep a state snapshot every this many steps.
    pub snapshot_every: Option<usize>,
    /// Amplitude of a uniform random perturbation of the free controls in the
    /// first schedule, in degrees for yaw entries. Zero disables it.
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EmpcConfig {
    /// Dynamic induction control in 2D, 30 time units.
    pub fn induction_2d() -> Self {
        EmpcConfig {
            steps: 150,
            iterations: 50,
            initial_controls: vec![0.33, 0.0, 0.33, 0.0],
            spin_up_steps: None,
            virtual_yaw_tracks_wind: true,
            snapshot_every: None,
            perturbation: 0.0,
            seed: 0,
        }
    }

    /// Yaw control in 3D under a rotating wind, 30 time units.
    pub fn yaw_3d() -> Self {
        EmpcConfig {
            steps: 100,
            iterations: 10,
            initial_controls: vec![0.33, 30f64.to_radians(), 0.33, 0.0],
            spin_up_steps: None,
            virtual_yaw_tracks_wind: true,
            snapshot_every: None,
            perturbation: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self, n_controls: usize) -> Result<()> {
        if self.initial_controls.len() != n_controls {
            return Err(FvwError::InvalidConfig(format!(
                "initial controls need {n_controls} entries, got {}",
                self.initial_controls.len()
            )));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(FvwError::InvalidConfig(format!(
                "perturbation must be finite and non-negative, got {}",
                self.perturbation
            )));
        }
        Ok(())
    }
}

/// One implemented step of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub time: f64,
    /// Controls implemented at this step.
    pub controls: Vec<f64>,
    /// Turbine powers resulting from these controls.
    pub outputs: Vec<f64>,
    /// Best horizon objective found at this step.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct EmpcTrajectory {
    pub rows: Vec<TrajectoryRow>,
    pub snapshots: Vec<(usize, StateVector)>,
    pub final_state: StateVector,
    pub diagnostics: Diagnostics,
}

impl EmpcTrajectory {
    pub fn control_series(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.controls[index]).collect()
    }

    pub fn total_power(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.outputs.iter().sum()).collect()
    }
}

/// Controls held by the scenario at step `k`: the initial controls, with
/// virtual turbines facing the wind if configured.
pub fn scenario_controls(model: &WakeModel, inflow: &InflowScenario, cfg: &EmpcConfig, k: usize) -> Vec<f64> {
    let mut m = cfg.initial_controls.clone();
    if cfg.virtual_yaw_tracks_wind {
        let theta = inflow.direction(k, model.config().time_step);
        for (t, turbine) in model.config().turbines.iter().enumerate() {
            if turbine.is_virtual {
                m[2 * t + 1] = theta;
            }
        }
    }
    m
}

/// Spin up under the initial controls and the wind of step 0.
pub fn empc_initial_state(model: &WakeModel, inflow: &InflowScenario, cfg: &EmpcConfig) -> Result<StateVector> {
    let frozen = inflow.frozen_at(0, model.config().time_step);
    let controls = scenario_controls(model, inflow, cfg, 0);
    let n = cfg.spin_up_steps.unwrap_or_else(|| model.default_spin_up_steps());
    model.spin_up(&frozen, &controls, n)
}

/// Receding-horizon loop: optimise, implement the first control, advance the
/// plant, warm-start from the shifted optimum. `progress` is called after
/// every implemented step.
pub fn empc_run(
    model: &WakeModel,
    inflow: &InflowScenario,
    objective: &ObjectiveConfig,
    adam: &AdamConfig,
    cfg: &EmpcConfig,
    mut progress: impl FnMut(&TrajectoryRow),
) -> Result<EmpcTrajectory> {
    let mc = model.config();
    objective.validate(mc.n_t(), mc.n_controls())?;
    cfg.validate(mc.n_controls())?;
    inflow.validate()?;
    let h = mc.time_step;
    let mut state = empc_initial_state(model, inflow, cfg)?;
    let free = &objective.free_controls;
    let mut schedule: Vec<Vec<f64>> = (0..=objective.horizon)
        .map(|i| scenario_controls(model, inflow, cfg, i))
        .collect();
    if cfg.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for m in schedule.iter_mut() {
            for &c in free {
                let scale = if c % 2 == 1 { std::f64::consts::PI / 180.0 } else { 1.0 };
                m[c] += scale * rng.gen_range(-cfg.perturbation..=cfg.perturbation);
            }
        }
    }
    schedule.iter_mut().for_each(|m| clamp_controls(m));

    let mut rows = Vec::with_capacity(cfg.steps);
    let mut snapshots = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for k in 0..cfg.steps {
        if let Some(every) = cfg.snapshot_every.filter(|&e| e > 0) {
            if k % every == 0 {
                snapshots.push((k, state.clone()));
            }
        }
        let opt = optimize_horizon(model, &state, &schedule, inflow, k, objective, adam, cfg.iterations)?;
        diagnostics.merge(opt.diagnostics);
        let m = opt.schedule[0].clone();
        state = model.step(&state, &m, inflow, k)?;
        let row = TrajectoryRow {
            step: k,
            time: k as f64 * h,
            controls: m,
            outputs: model.output(&state)?,
            objective: opt.best,
        };
        progress(&row);
        rows.push(row);

        schedule = shift_schedule(&opt.schedule);
        for (i, m) in schedule.iter_mut().enumerate() {
            let base = scenario_controls(model, inflow, cfg, k + 1 + i);
            for c in 0..m.len() {
                if !free.contains(&c) {
                    m[c] = base[c];
                }
            }
        }
    }
    Ok(EmpcTrajectory {
        rows,
        snapshots,
        final_state: state,
        diagnostics,
    })
}
