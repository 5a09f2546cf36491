//! Discrete-adjoint gradients of horizon objectives.
//!
//! The forward pass stores each state together with the dense partials that
//! couple the shed circulation and the outputs to the whole state. The
//! backward pass recomputes the kernel partials of the convection step from
//! the stored state, so memory stays `O(N_h n_s)`.

pub mod dump;
pub mod jacobian;

pub use jacobian::{output_jacobian, step_jacobians, DenseMatrix, Diagnostics, JacobianFault, StepJacobians};

use crate::control::ObjectiveConfig;
use crate::error::{FvwError, Result};
use crate::model::{InflowScenario, StateVector, WakeModel};
use jacobian::{output_partials, shed_partials, vjp_control, vjp_state, ShedPartials};

/// Everything the backward pass needs from one step of the forward pass.
#[derive(Debug, Clone)]
pub struct TapeRecord {
    /// Absolute time step index of `state`.
    pub step: usize,
    pub state: StateVector,
    pub controls: Vec<f64>,
    pub outputs: Vec<f64>,
    pub stage_cost: f64,
    /// `dJ_k/dq_k` over the flat state.
    pub dj_dq: Vec<f64>,
    /// `dJ_k/dm_k` over the full control vector.
    pub dj_dm: Vec<f64>,
    /// Partials of the circulation shed by this step; absent for the final record.
    pub(crate) shed: Option<ShedPartials>,
}

impl TapeRecord {
    /// `dGamma^0/dq_k`, if this record advanced the state.
    pub fn shed_gradient(&self) -> Option<&[f64]> {
        self.shed.as_ref().map(|s| s.d_state.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct AdjointTape {
    pub records: Vec<TapeRecord>,
    pub objective: ObjectiveConfig,
    /// `J_total`.
    pub total: f64,
    pub diagnostics: Diagnostics,
}

impl AdjointTape {
    pub fn horizon(&self) -> usize {
        self.records.len() - 1
    }

    pub fn outputs(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.outputs.clone()).collect()
    }
}

fn check_schedule(
    model: &WakeModel,
    state0: &StateVector,
    schedule: &[Vec<f64>],
    objective: &ObjectiveConfig,
) -> Result<()> {
    let cfg = model.config();
    state0.check_layout(cfg)?;
    objective.validate(cfg.n_t(), cfg.n_controls())?;
    if schedule.is_empty() {
        return Err(FvwError::LayoutMismatch("empty control schedule".into()));
    }
    if let Some(m) = schedule.iter().find(|m| m.len() != cfg.n_controls()) {
        return Err(FvwError::LayoutMismatch(format!(
            "schedule entry has {} controls, expected {}",
            m.len(),
            cfg.n_controls()
        )));
    }
    Ok(())
}

/// Simulate `schedule.len() - 1` steps from `state0` (at absolute step `k0`)
/// and record the tape. Entry `k` of the schedule is applied at step `k0 + k`;
/// the last entry only enters the move penalty.
pub fn forward_with_tape(
    model: &WakeModel,
    state0: &StateVector,
    schedule: &[Vec<f64>],
    inflow: &InflowScenario,
    k0: usize,
    objective: &ObjectiveConfig,
) -> Result<AdjointTape> {
    check_schedule(model, state0, schedule, objective)?;
    let cfg = model.config();
    let n = schedule.len() - 1;
    let mut diag = Diagnostics::default();
    let mut records = Vec::with_capacity(n + 1);
    let mut state = state0.clone();
    let mut total = 0.0;
    for (k, m) in schedule.iter().enumerate() {
        let outputs = model.output(&state)?;
        let move_grad = objective.move_cost_gradient(m, &state.saved_controls);
        let mut dj_dq = vec![0.0; cfg.state_size()];
        for (t, &q) in objective.output_weights.iter().enumerate() {
            if q != 0.0 {
                let row = output_partials(model, &state, t, &mut diag)?;
                dj_dq.iter_mut().zip(&row).for_each(|(d, r)| *d += q * r);
            }
        }
        for (c, g) in move_grad.iter().enumerate() {
            dj_dq[cfg.m_offset() + c] -= g;
        }
        let stage_cost = objective.stage_cost(&outputs, m, &state.saved_controls);
        total += stage_cost;
        let (shed, next) = if k < n {
            let shed = shed_partials(model, &state, m, &mut diag)?;
            let next = model.step(&state, m, inflow, k0 + k)?;
            (Some(shed), Some(next))
        } else {
            (None, None)
        };
        records.push(TapeRecord {
            step: k0 + k,
            state,
            controls: m.clone(),
            outputs,
            stage_cost,
            dj_dq,
            dj_dm: move_grad,
            shed,
        });
        match next {
            Some(s) => state = s,
            None => break,
        }
    }
    Ok(AdjointTape {
        records,
        objective: objective.clone(),
        total,
        diagnostics: diag,
    })
}

/// Adjoint states `lambda_k`, `k = 0..=N_h`. `lambda_0` is not needed for the
/// gradient and is left at zero.
#[derive(Debug, Clone)]
pub struct AdjointStates {
    pub lambdas: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

pub fn backward_sweep(model: &WakeModel, tape: &AdjointTape) -> Result<AdjointStates> {
    backward_sweep_with(model, tape, None)
}

/// [`backward_sweep`] with an optional deliberate fault in the Jacobian.
pub fn backward_sweep_with(
    model: &WakeModel,
    tape: &AdjointTape,
    fault: Option<JacobianFault>,
) -> Result<AdjointStates> {
    let n = tape.horizon();
    let ns = model.config().state_size();
    let mut diag = Diagnostics::default();
    let mut lambdas = vec![Vec::new(); n + 1];
    lambdas[0] = vec![0.0; ns];
    if n == 0 {
        return Ok(AdjointStates {
            lambdas,
            diagnostics: diag,
        });
    }
    lambdas[n] = tape.records[n].dj_dq.clone();
    for k in (1..n).rev() {
        let rec = &tape.records[k];
        let shed = rec.shed.as_ref().expect("non-final record carries shed partials");
        let mut lam = vjp_state(model, &rec.state, shed, &lambdas[k + 1], fault, &mut diag)?;
        lam.iter_mut().zip(&rec.dj_dq).for_each(|(l, d)| *l += d);
        lambdas[k] = lam;
    }
    Ok(AdjointStates {
        lambdas,
        diagnostics: diag,
    })
}

/// Per-step gradients over the free controls,
/// `dJ_k/dm_k + lambda_{k+1}^T df_k/dm_k` (direct term only at the last step).
pub fn gradient(model: &WakeModel, tape: &AdjointTape, adjoint: &AdjointStates) -> Result<Vec<Vec<f64>>> {
    let n = tape.horizon();
    if adjoint.lambdas.len() != n + 1 {
        return Err(FvwError::LayoutMismatch("adjoint states do not match the tape".into()));
    }
    let free = &tape.objective.free_controls;
    Ok(tape
        .records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let mut g = rec.dj_dm.clone();
            if k < n {
                let shed = rec.shed.as_ref().expect("non-final record carries shed partials");
                let v = vjp_control(model, &rec.controls, shed, &adjoint.lambdas[k + 1]);
                g.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
            free.iter().map(|&c| g[c]).collect()
        })
        .collect())
}

/// Objective value and adjoint gradient in one call.
#[derive(Debug, Clone)]
pub struct GradientResult {
    pub objective: f64,
    pub gradient: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

pub fn objective_gradient(
    model: &WakeModel,
    state0: &StateVector,
    schedule: &[Vec<f64>],
    inflow: &InflowScenario,
    k0: usize,
    objective: &ObjectiveConfig,
) -> Result<GradientResult> {
    let tape = forward_with_tape(model, state0, schedule, inflow, k0, objective)?;
    let adjoint = backward_sweep(model, &tape)?;
    let gradient = gradient(model, &tape, &adjoint)?;
    let mut diagnostics = tape.diagnostics;
    diagnostics.merge(adjoint.diagnostics);
    Ok(GradientResult {
        objective: tape.total,
        outputs: tape.outputs(),
        gradient,
        diagnostics,
    })
}

/// `J_total` by a plain forward simulation.
pub fn objective_value(
    model: &WakeModel,
    state0: &StateVector,
    schedule: &[Vec<f64>],
    inflow: &InflowScenario,
    k0: usize,
    objective: &ObjectiveConfig,
) -> Result<f64> {
    check_schedule(model, state0, schedule, objective)?;
    let mut state = state0.clone();
    let mut total = 0.0;
    let n = schedule.len() - 1;
    for (k, m) in schedule.iter().enumerate() {
        total += objective.stage_cost(&model.output(&state)?, m, &state.saved_controls);
        if k < n {
            state = model.step(&state, m, inflow, k0 + k)?;
        }
    }
    Ok(total)
}

/// Central-difference gradient over the free controls of every step.
pub fn finite_difference_gradient(
    model: &WakeModel,
    state0: &StateVector,
    schedule: &[Vec<f64>],
    inflow: &InflowScenario,
    k0: usize,
    objective: &ObjectiveConfig,
    eps: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(eps > 0.0) {
        return Err(FvwError::InvalidConfig(format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    let mut work = schedule.to_vec();
    let mut out = Vec::with_capacity(schedule.len());
    for k in 0..schedule.len() {
        let mut row = Vec::with_capacity(objective.n_m());
        for &c in &objective.free_controls {
            let base = work[k][c];
            work[k][c] = base + eps;
            let plus = objective_value(model, state0, &work, inflow, k0, objective)?;
            work[k][c] = base - eps;
            let minus = objective_value(model, state0, &work, inflow, k0, objective)?;
            work[k][c] = base;
            row.push((plus - minus) / (2.0 * eps));
        }
        out.push(row);
    }
    Ok(out)
}

/// Largest relative deviation between two gradients, with an absolute floor
/// for components that are near zero in both.
pub fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>], floor: f64) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d <= floor {
                0.0
            } else {
                d / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}
