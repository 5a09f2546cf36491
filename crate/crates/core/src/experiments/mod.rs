//! Experiment drivers behind the `fvw` binary: steady sweeps, the
//! discretisation study, gradient checks, closed-loop runs and flow fields.

pub mod config;
pub mod grid;
pub mod output;

pub use config::{
    default_induction_grid, default_yaw_grid, ConvergenceSettings, ExperimentConfig, FlowfieldSettings, Preset,
    ResolvedExperiment, SweepSettings,
};
pub use grid::parse_grid;

use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjoint::{
    backward_sweep_with, finite_difference_gradient, forward_with_tape, gradient, max_relative_error, JacobianFault,
};
use crate::control::{dominant_frequency, empc_run, EmpcConfig, EmpcTrajectory, ObjectiveConfig, TrajectoryRow};
use crate::error::{FvwError, Result};
use crate::kernels::Dimension;
use crate::linalg::Vec3;
use crate::model::rotor::power_coefficient;
use crate::model::{InflowScenario, ModelConfig, StateVector, WakeModel};

/// Size the global worker pool used by sweeps and flow fields.
pub fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| FvwError::InvalidConfig(format!("thread pool: {e}")))
}

/// Turbine powers averaged over the final steps of a spin-up.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub powers: Vec<f64>,
    /// `(max - min) / mean` of the total power over the averaging window.
    pub variation: f64,
    pub state: StateVector,
}

/// Spin up from the empty wake for `spin_up` steps under constant controls
/// and average the powers of the last `average` steps.
pub fn steady_state(
    model: &WakeModel,
    inflow: &InflowScenario,
    controls: &[f64],
    spin_up: usize,
    average: usize,
) -> Result<SteadyState> {
    if average == 0 || average > spin_up {
        return Err(FvwError::InvalidConfig(format!(
            "averaging window {average} must be within the spin-up of {spin_up} steps"
        )));
    }
    let mut state = model.spin_up(inflow, controls, spin_up - average)?;
    let n_t = model.config().n_t();
    let mut sum = vec![0.0; n_t];
    let mut totals = Vec::with_capacity(average);
    for k in spin_up - average..spin_up {
        state = model.step(&state, controls, inflow, k)?;
        let y = model.output(&state)?;
        sum.iter_mut().zip(&y).for_each(|(s, p)| *s += p);
        totals.push(y.iter().sum::<f64>());
    }
    let mean = totals.iter().sum::<f64>() / average as f64;
    let (lo, hi) = totals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    Ok(SteadyState {
        powers: sum.into_iter().map(|s| s / average as f64).collect(),
        variation: if mean != 0.0 { (hi - lo) / mean.abs() } else { hi - lo },
        state,
    })
}

/// Momentum-theory powers of an isolated upstream rotor at `a0` and of a
/// rotor at `a1` in its fully developed wake, unit free stream.
pub fn reference_powers(a0: f64, a1: f64, rotor_area: f64) -> Result<(f64, f64)> {
    let p0 = 0.5 * power_coefficient(a0)? * rotor_area * (1.0 - a0).powi(3);
    let p1 = 0.5 * power_coefficient(a1)? * rotor_area * ((1.0 - 2.0 * a0) * (1.0 - a1)).powi(3);
    Ok((p0, p1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub powers: Vec<f64>,
    pub total: f64,
    /// Powers over their momentum-theory references, when defined.
    pub normalized: Option<Vec<f64>>,
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    fn argmax_by(&self, f: impl Fn(&SweepPoint) -> f64) -> &SweepPoint {
        self.points
            .iter()
            .fold(None::<&SweepPoint>, |best, p| match best {
                Some(b) if f(b) >= f(p) => Some(b),
                _ => Some(p),
            })
            .expect("non-empty sweep")
    }

    pub fn argmax_total(&self) -> &SweepPoint {
        self.argmax_by(|p| p.total)
    }

    pub fn argmax_turbine(&self, turbine: usize) -> &SweepPoint {
        self.argmax_by(|p| p.powers[turbine])
    }

    /// Grid point closest to `value`.
    pub fn nearest(&self, value: f64) -> &SweepPoint {
        self.points
            .iter()
            .min_by(|a, b| (a.value - value).abs().total_cmp(&(b.value - value).abs()))
            .expect("non-empty sweep")
    }

    /// Relative gain of the best total power over the total at `value`.
    pub fn gain_over(&self, value: f64) -> f64 {
        self.argmax_total().total / self.nearest(value).total - 1.0
    }
}

fn sweep_inflow(exp: &ResolvedExperiment) -> InflowScenario {
    exp.scenario.frozen_at(0, exp.model.time_step)
}

fn run_sweep(
    exp: &ResolvedExperiment,
    parameter: &str,
    values: &[f64],
    controls_for: impl Fn(f64) -> Vec<f64> + Sync,
    normalize: impl Fn(f64) -> Result<Option<(f64, f64)>> + Sync,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(FvwError::InvalidConfig("empty sweep grid".into()));
    }
    let model = WakeModel::new(exp.model.clone())?;
    let inflow = sweep_inflow(exp);
    let s = &exp.sweep;
    let points = values
        .par_iter()
        .map(|&v| {
            let steady = steady_state(&model, &inflow, &controls_for(v), s.spin_up_steps, s.average_steps)?;
            let normalized = normalize(v)?
                .filter(|&(r0, r1)| r0 > 0.0 && r1 > 0.0)
                .map(|(r0, r1)| vec![steady.powers[0] / r0, steady.powers[1] / r1]);
            info!("{parameter} = {v}: powers {:?}", steady.powers);
            Ok(SweepPoint {
                value: v,
                total: steady.powers.iter().sum(),
                powers: steady.powers,
                normalized,
                variation: steady.variation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        parameter: parameter.into(),
        points,
    })
}

fn base_controls(model: &ModelConfig, theta: f64, downstream: f64) -> Vec<f64> {
    let mut m = Vec::with_capacity(model.n_controls());
    for _ in &model.turbines {
        m.extend([downstream, theta]);
    }
    m
}

/// Steady powers against the upstream induction, other turbines at the
/// downstream induction and facing the wind.
pub fn sweep_induction(exp: &ResolvedExperiment, grid: &[f64]) -> Result<SweepResult> {
    SweepSettings {
        induction_grid: grid.to_vec(),
        ..exp.sweep.clone()
    }
    .validate()?;
    let theta = sweep_inflow(exp).direction(0, exp.model.time_step);
    let a1 = exp.sweep.downstream_induction;
    let area = exp.model.rotor_area;
    let two_turbines = exp.model.n_t() == 2;
    run_sweep(
        exp,
        "a",
        grid,
        |a| {
            let mut m = base_controls(&exp.model, theta, a1);
            m[0] = a;
            m
        },
        |a| {
            if two_turbines && a > 0.0 {
                reference_powers(a, a1, area).map(Some)
            } else {
                Ok(None)
            }
        },
    )
}

/// Steady powers against the upstream yaw (degrees relative to the wind).
pub fn sweep_yaw(exp: &ResolvedExperiment, grid_deg: &[f64]) -> Result<SweepResult> {
    SweepSettings {
        yaw_grid_deg: grid_deg.to_vec(),
        ..exp.sweep.clone()
    }
    .validate()?;
    let theta = sweep_inflow(exp).direction(0, exp.model.time_step);
    let s = &exp.sweep;
    run_sweep(
        exp,
        "psi_deg",
        grid_deg,
        |psi| {
            let mut m = base_controls(&exp.model, theta, s.downstream_induction);
            m[0] = s.upstream_induction;
            m[1] = theta + psi.to_radians();
            m
        },
        |_| Ok(None),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub time_step: f64,
    pub core_size: f64,
    pub rings: usize,
    pub elements_per_ring: usize,
    pub p0: f64,
    pub p1: f64,
    pub p0_normalized: f64,
    pub p1_normalized: f64,
    pub variation: f64,
}

/// Discretisations of the study: every pair of time step and core size at
/// the preset ring count, then ring count and (3D) ring resolution varied on
/// their own.
pub fn convergence_configs(exp: &ResolvedExperiment) -> Vec<ModelConfig> {
    let base = &exp.model;
    let c = &exp.convergence;
    let mut out: Vec<ModelConfig> = Vec::new();
    let mut push = |m: ModelConfig| {
        if !out.contains(&m) {
            out.push(m);
        }
    };
    for &h in &c.time_steps {
        for &sigma in &c.core_sizes {
            push(ModelConfig {
                time_step: h,
                core_size: sigma,
                ..base.clone()
            });
        }
    }
    for &rings in &c.rings {
        push(ModelConfig { rings, ..base.clone() });
    }
    if base.dimension == Dimension::Three {
        for &n_e in &c.elements_per_ring {
            push(ModelConfig {
                elements_per_ring: n_e,
                ..base.clone()
            });
        }
    }
    out
}

/// Normalised steady powers over the discretisation study.
pub fn convergence(exp: &ResolvedExperiment) -> Result<Vec<ConvergenceRow>> {
    let c = &exp.convergence;
    let (r0, r1) = reference_powers(c.upstream_induction, c.downstream_induction, exp.model.rotor_area)?;
    let configs = convergence_configs(exp);
    configs
        .par_iter()
        .map(|mc| {
            let model = WakeModel::new(mc.clone())?;
            let inflow = exp.scenario.frozen_at(0, mc.time_step);
            let theta = inflow.direction(0, mc.time_step);
            let mut m = base_controls(mc, theta, c.downstream_induction);
            m[0] = c.upstream_induction;
            let steady = steady_state(
                &model,
                &inflow,
                &m,
                model.default_spin_up_steps(),
                exp.sweep.average_steps,
            )?;
            info!(
                "h = {}, sigma = {}, n_r = {}, n_e = {}: p0/ref = {:.4}",
                mc.time_step,
                mc.core_size,
                mc.rings,
                mc.elements_per_ring,
                steady.powers[0] / r0
            );
            Ok(ConvergenceRow {
                time_step: mc.time_step,
                core_size: mc.core_size,
                rings: mc.rings,
                elements_per_ring: mc.elements_per_ring,
                p0: steady.powers[0],
                p1: steady.powers[1],
                p0_normalized: steady.powers[0] / r0,
                p1_normalized: steady.powers[1] / r1,
                variation: steady.variation,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YawResolutionRow {
    pub elements_per_ring: usize,
    pub psi_deg: f64,
    pub total: f64,
}

/// Total power against yaw for each ring resolution of the study.
pub fn yaw_resolution(exp: &ResolvedExperiment, grid_deg: &[f64]) -> Result<Vec<YawResolutionRow>> {
    let mut rows = Vec::new();
    for &n_e in &exp.convergence.elements_per_ring {
        let mut e = exp.clone();
        e.model.elements_per_ring = n_e;
        let sweep = sweep_yaw(&e, grid_deg)?;
        rows.extend(sweep.points.iter().map(|p| YawResolutionRow {
            elements_per_ring: n_e,
            psi_deg: p.value,
            total: p.total,
        }));
    }
    Ok(rows)
}

/// Tolerance of the gradient check.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub name: String,
    pub horizon: usize,
    /// Relative deviation, ignoring components that agree to 1e-9 absolute.
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub cases: Vec<GradcheckCase>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

/// Small 2D configuration for dense checks; the virtual turbine sits in the
/// short wake.
pub fn tiny_config_2d(rings: usize) -> ModelConfig {
    let mut c = ModelConfig::reference_2d();
    c.rings = rings;
    c.turbines[1].position = [1.1, 0.1, 0.0];
    c
}

pub fn tiny_config_3d() -> ModelConfig {
    let mut c = ModelConfig::reference_3d();
    c.rings = 4;
    c.elements_per_ring = 6;
    c.turbines[1].position = [1.0, 0.1, 0.05];
    c
}

fn random_controls(rng: &mut impl Rng) -> Vec<f64> {
    vec![
        rng.gen_range(0.26..0.45),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(0.2..0.4),
        rng.gen_range(-0.3..0.3),
    ]
}

fn gradcheck_case(
    name: &str,
    config: ModelConfig,
    inflow: &InflowScenario,
    k0: usize,
    horizon: usize,
    fault: Option<JacobianFault>,
    rng: &mut ChaCha8Rng,
) -> Result<GradcheckCase> {
    let model = WakeModel::new(config)?;
    let objective = ObjectiveConfig {
        output_weights: vec![-1.0, -1.0],
        move_weights: vec![vec![1.5, 0.2], vec![0.2, 0.4]],
        horizon,
        free_controls: vec![0, 1],
    };
    // an asymmetric, fully populated wake
    let mut state = model.empty_state(&random_controls(rng), inflow)?;
    for k in 0..model.config().rings + 2 {
        state = model.step(&state, &random_controls(rng), inflow, k)?;
    }
    let schedule: Vec<Vec<f64>> = (0..=horizon).map(|_| random_controls(rng)).collect();
    let tape = forward_with_tape(&model, &state, &schedule, inflow, k0, &objective)?;
    let adjoint = backward_sweep_with(&model, &tape, fault)?;
    let adj = gradient(&model, &tape, &adjoint)?;
    let fd = finite_difference_gradient(&model, &state, &schedule, inflow, k0, &objective, 1e-6)?;
    let e = max_relative_error(&adj, &fd, 1e-9);
    let abs = adj
        .iter()
        .flatten()
        .zip(fd.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    info!("{name}: max relative error {e:.3e}, max absolute error {abs:.3e}");
    Ok(GradcheckCase {
        name: name.into(),
        horizon,
        max_relative_error: e,
        max_absolute_error: abs,
        passed: e <= GRADCHECK_TOLERANCE,
    })
}

/// Adjoint against central differences on tiny 2D and 3D configurations,
/// with both controls of the upstream turbine free. `fault` corrupts the
/// adjoint Jacobian to exercise the check itself.
pub fn gradcheck(seed: u64, fault: Option<JacobianFault>) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wind = InflowScenario::Uniform {
        magnitude: 1.0,
        direction: 0.05,
    };
    let cases = vec![
        gradcheck_case("2d", tiny_config_2d(5), &wind, 0, 8, fault, &mut rng)?,
        gradcheck_case(
            "3d",
            tiny_config_3d(),
            &InflowScenario::rotating_default(),
            20,
            5,
            fault,
            &mut rng,
        )?,
    ];
    Ok(GradcheckReport {
        tolerance: GRADCHECK_TOLERANCE,
        cases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpcSummary {
    pub steps: usize,
    pub iterations: usize,
    pub seed: u64,
    pub mean_after: f64,
    /// Mean total power over the rows with `time > mean_after`.
    pub mean_power: f64,
    pub baseline: String,
    pub baseline_power: f64,
    pub gain_percent: f64,
    /// Of the upstream induction over the same window; absent when the
    /// signal is too short or constant.
    pub dominant_frequency: Option<f64>,
    pub mean_induction: f64,
    pub final_yaw_deg: f64,
    pub degenerate_pairs: usize,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EmpcReport {
    pub trajectory: EmpcTrajectory,
    pub summary: EmpcSummary,
}

fn window_mean(rows: &[TrajectoryRow], after: f64, f: impl Fn(&TrajectoryRow) -> f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.time > after).map(f).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Mean total power of the best steady upstream induction on a fine grid.
pub fn best_steady_induction(exp: &ResolvedExperiment) -> Result<(f64, f64)> {
    let grid: Vec<f64> = (0..=32).map(|i| 0.2 + 0.005 * i as f64).collect();
    let sweep = sweep_induction(exp, &grid)?;
    let best = sweep.argmax_total();
    Ok((best.value, best.total))
}

/// Greedy operation: every turbine at `a = 0.33` facing the current wind.
/// Returns rows in the layout of the closed loop.
pub fn greedy_tracking(model: &WakeModel, inflow: &InflowScenario, cfg: &EmpcConfig) -> Result<Vec<TrajectoryRow>> {
    let h = model.config().time_step;
    let greedy = |k: usize| {
        let theta = inflow.direction(k, h);
        (0..model.config().n_t())
            .flat_map(|_| [0.33, theta])
            .collect::<Vec<f64>>()
    };
    let frozen = inflow.frozen_at(0, h);
    let spin = cfg.spin_up_steps.unwrap_or_else(|| model.default_spin_up_steps());
    let mut state = model.spin_up(&frozen, &greedy(0), spin)?;
    let mut rows = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let m = greedy(k);
        state = model.step(&state, &m, inflow, k)?;
        rows.push(TrajectoryRow {
            step: k,
            time: k as f64 * h,
            controls: m,
            outputs: model.output(&state)?,
            objective: f64::NAN,
        });
    }
    Ok(rows)
}

/// Closed-loop run with summary statistics and the matching baseline: the
/// best steady induction when only inductions are free, greedy wind
/// tracking otherwise.
pub fn run_empc(exp: &ResolvedExperiment, progress: impl FnMut(&TrajectoryRow)) -> Result<EmpcReport> {
    let started = Instant::now();
    let model = WakeModel::new(exp.model.clone())?;
    let trajectory = empc_run(&model, &exp.scenario, &exp.objective, &exp.adam, &exp.empc, progress)?;
    let runtime_seconds = started.elapsed().as_secs_f64();
    let rows = &trajectory.rows;
    let after = exp.mean_after;
    let total = |r: &TrajectoryRow| r.outputs.iter().sum::<f64>();
    let mean_power = window_mean(rows, after, total);

    let yaw_free = exp.objective.free_controls.iter().any(|c| c % 2 == 1);
    let (baseline, baseline_power) = if yaw_free {
        let greedy = greedy_tracking(&model, &exp.scenario, &exp.empc)?;
        ("greedy_wind_tracking".to_string(), window_mean(&greedy, after, total))
    } else {
        let (a, p) = best_steady_induction(exp)?;
        (format!("best_steady_induction(a={a:.3})"), p)
    };

    let induction: Vec<f64> = rows.iter().filter(|r| r.time > after).map(|r| r.controls[0]).collect();
    let dominant_frequency = dominant_frequency(&induction, exp.model.time_step).ok();
    let summary = EmpcSummary {
        steps: exp.empc.steps,
        iterations: exp.empc.iterations,
        seed: exp.seed,
        mean_after: after,
        mean_power,
        baseline,
        baseline_power,
        gain_percent: 100.0 * (mean_power / baseline_power - 1.0),
        dominant_frequency,
        mean_induction: window_mean(rows, after, |r| r.controls[0]),
        final_yaw_deg: rows.last().map_or(f64::NAN, |r| r.controls[1].to_degrees()),
        degenerate_pairs: trajectory.diagnostics.degenerate_pairs,
        runtime_seconds,
    };
    Ok(EmpcReport { trajectory, summary })
}

/// Constant-control simulation after the closed-loop spin-up: the closed
/// loop with zero optimiser iterations.
pub fn simulate(exp: &ResolvedExperiment) -> Result<EmpcTrajectory> {
    let model = WakeModel::new(exp.model.clone())?;
    let cfg = EmpcConfig {
        iterations: 0,
        ..exp.empc.clone()
    };
    let mut objective = exp.objective.clone();
    objective.horizon = 0;
    empc_run(&model, &exp.scenario, &objective, &exp.adam, &cfg, |_| {})
}

/// Velocity sampled on a horizontal grid, averaged over the heights of the
/// settings. `velocity[j * nx + i]` belongs to `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub velocity: Vec<Vec3>,
}

impl FlowField {
    pub fn at(&self, i: usize, j: usize) -> Vec3 {
        self.velocity[j * self.xs.len() + i]
    }
}

pub fn sample_flowfield(model: &WakeModel, state: &StateVector, settings: &FlowfieldSettings) -> FlowField {
    let xs = settings.xs();
    let ys = settings.ys();
    let zs: &[f64] = if model.config().dimension == Dimension::Three {
        &settings.z_levels
    } else {
        &[0.0]
    };
    let velocity = ys
        .par_iter()
        .flat_map_iter(|&y| {
            xs.iter().map(move |&x| {
                let mut u = [0.0; 3];
                for &z in zs {
                    let v = model.flow_velocity([x, y, z], state);
                    (0..3).for_each(|d| u[d] += v[d] / zs.len() as f64);
                }
                u
            })
        })
        .collect();
    FlowField { xs, ys, velocity }
}

/// Circulation around the upper (`z > 0`) and lower half of a disc of
/// `radius` in the plane `x`, centred on `(x, y_c, 0)`, counter-clockwise
/// seen from upstream, by the midpoint rule with `n` nodes per boundary
/// segment.
pub fn half_disc_circulation(
    model: &WakeModel,
    state: &StateVector,
    x: f64,
    y_c: f64,
    radius: f64,
    n: usize,
) -> (f64, f64) {
    use std::f64::consts::PI;
    let tangential = |p: Vec3, t: [f64; 2]| {
        let u = model.flow_velocity(p, state);
        u[1] * t[0] + u[2] * t[1]
    };
    let half = |sign: f64| {
        let mut c = 0.0;
        // arc, angle from 0 to pi on the chosen side
        let dphi = PI / n as f64;
        for i in 0..n {
            let phi = (i as f64 + 0.5) * dphi;
            let (s, co) = phi.sin_cos();
            let p = [x, y_c + radius * co, sign * radius * s];
            c += tangential(p, [-s, sign * co]) * radius * dphi;
        }
        // diameter back from (-r) to (+r)
        let ds = 2.0 * radius / n as f64;
        for i in 0..n {
            let y = -radius + (i as f64 + 0.5) * ds;
            c += tangential([x, y_c + y, 0.0], [1.0, 0.0]) * ds;
        }
        // the lower path runs clockwise in (y, z); flip so both share the x normal
        sign * c
    };
    (half(1.0), half(-1.0))
}

/// Upper and lower half-disc circulations of a steady 3D wake at `x` for an
/// upstream yaw of `psi_deg`.
pub fn curled_wake_circulation(exp: &ResolvedExperiment, psi_deg: f64, x: f64, radius: f64) -> Result<(f64, f64)> {
    let model = WakeModel::new(exp.model.clone())?;
    let inflow = sweep_inflow(exp);
    let theta = inflow.direction(0, exp.model.time_step);
    let mut m = base_controls(&exp.model, theta, exp.sweep.downstream_induction);
    m[0] = exp.sweep.upstream_induction;
    m[1] = theta + psi_deg.to_radians();
    let state = model.spin_up(&inflow, &m, exp.sweep.spin_up_steps)?;
    Ok(half_disc_circulation(&model, &state, x, 0.0, radius, 200))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_power_arithmetic() {
        let (p0, p1) = reference_powers(0.3, 0.33, std::f64::consts::FRAC_PI_4).unwrap();
        let p0_hand = 0.5 * (4.0 * 0.3 / 0.7) * std::f64::consts::FRAC_PI_4 * 0.7f64.powi(3);
        assert!((p0 - p0_hand).abs() < 1e-15);
        assert!((p0 - 0.23091).abs() < 5e-6, "{p0}");
        assert!((p1 - 0.01489).abs() < 5e-6, "{p1}");
    }

    #[test]
    fn sweep_helpers() {
        let pt = |v: f64, t: f64| SweepPoint {
            value: v,
            powers: vec![t, 0.0],
            total: t,
            normalized: None,
            variation: 0.0,
        };
        let s = SweepResult {
            parameter: "a".into(),
            points: vec![pt(0.1, 1.0), pt(0.2, 1.2), pt(0.3, 1.1)],
        };
        assert_eq!(s.argmax_total().value, 0.2);
        assert_eq!(s.nearest(0.29).value, 0.3);
        assert!((s.gain_over(0.3) - (1.2 / 1.1 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn circulation_of_uniform_flow_vanishes() {
        let model = WakeModel::new(ModelConfig::reference_3d()).unwrap();
        let state = model
            .empty_state(&[0.33, 0.0, 0.33, 0.0], &InflowScenario::unit())
            .unwrap();
        let (up, lo) = half_disc_circulation(&model, &state, 3.0, 0.0, 0.6, 50);
        assert!(up.abs() < 1e-12 && lo.abs() < 1e-12);
    }
}
