//! Partial derivatives of the state update and the output.
//!
//! Two independent routes are provided. The adjoint sweep uses matrix-free
//! vector-Jacobian products recomputed from the stored state; the dense block
//! assembly builds the full `df/dq` and `df/dm` for small configurations and is
//! used for verification and tape dumps.

use crate::error::{FvwError, Result};
use crate::kernels::{d_induced_velocity_2d, d_induced_velocity_3d, d_rot_z3, Dimension};
use crate::linalg::{add_assign, dot, matvec, scale, sub, vecmat, Mat3, Vec3, ZERO3};
use crate::model::rotor::{d_rotor_normal, d_thrust_coefficient, d_turbine_power, rotor_normal, thrust_coefficient};
use crate::model::{PointId, StateVector, WakeModel, FREESTREAM_DECAY};

/// Counters collected while differentiating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Kernel derivative evaluations skipped because the target was collinear
    /// with (or coincident to) the element.
    pub degenerate_pairs: usize,
}

impl Diagnostics {
    pub fn merge(&mut self, other: Diagnostics) {
        self.degenerate_pairs += other.degenerate_pairs;
    }
}

/// Deliberate corruption of the adjoint, used to check that verification
/// actually detects a wrong Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianFault {
    /// Drop the sensitivity of convected positions to circulation.
    DropCirculationCoupling,
    /// Drop the dependence of the shed circulation on the state.
    DropShedCoupling,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `v^T A`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(r)) {
                    *o += vr * a;
                }
            }
        }
        out
    }

    /// `A v`.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Partials of one element's induced velocity at a target, embedded in 3D.
/// In 2D the element has a single point, carried by `d_p1`.
pub(crate) struct ElementPartials {
    pub d_target: Mat3,
    pub d_p1: Mat3,
    pub d_p2: Mat3,
    pub d_gamma: Vec3,
}

fn embed2(m: [[f64; 2]; 2]) -> Mat3 {
    [[m[0][0], m[0][1], 0.0], [m[1][0], m[1][1], 0.0], [0.0; 3]]
}

pub(crate) fn element_partials(
    model: &WakeModel,
    x: Vec3,
    state: &StateVector,
    ring: usize,
    element: usize,
) -> Result<ElementPartials> {
    let cfg = model.config();
    let gamma = state.circulation[ring * cfg.elements_per_ring + element];
    let (p1, p2) = model.element_points(ring, element);
    match cfg.dimension {
        Dimension::Two => {
            let sign = model.element_sign(element);
            let s = state.positions[p1];
            let p = d_induced_velocity_2d([x[0], x[1]], [s[0], s[1]], sign * gamma, cfg.core_size)?;
            Ok(ElementPartials {
                d_target: embed2(p.du_dx0),
                d_p1: embed2(p.du_dx1),
                d_p2: [[0.0; 3]; 3],
                d_gamma: [sign * p.du_dgamma[0], sign * p.du_dgamma[1], 0.0],
            })
        }
        Dimension::Three => {
            let p = d_induced_velocity_3d(x, state.positions[p1], state.positions[p2], gamma, cfg.core_size)?;
            Ok(ElementPartials {
                d_target: p.du_dx0,
                d_p1: p.du_dx1,
                d_p2: p.du_dx2,
                d_gamma: p.du_dgamma,
            })
        }
    }
}

fn is_degenerate(e: &FvwError) -> bool {
    matches!(e, FvwError::DegenerateKernel(_))
}

/// Disc-averaged velocity and its derivatives with respect to the flat state
/// (one dense row per velocity component) and to the disc yaw.
pub(crate) struct RotorJacobian {
    pub velocity: Vec3,
    pub d_state: [Vec<f64>; 3],
    pub d_psi: Vec3,
}

impl RotorJacobian {
    /// `w^T du_r/dq` as a dense row.
    pub fn project(&self, w: Vec3) -> Vec<f64> {
        let mut out = vec![0.0; self.d_state[0].len()];
        for (c, row) in self.d_state.iter().enumerate() {
            if w[c] != 0.0 {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += w[c] * v;
                }
            }
        }
        out
    }
}

pub(crate) fn rotor_velocity_jacobian(
    model: &WakeModel,
    state: &StateVector,
    turbine: usize,
    psi: f64,
    diag: &mut Diagnostics,
) -> Result<RotorJacobian> {
    let cfg = model.config();
    let nd = cfg.n_d();
    let ns = cfg.state_size();
    let ne = cfg.elements_per_ring;
    let u_off = cfg.u_offset();
    let g_off = cfg.gamma_offset();
    let center = cfg.turbines[turbine].position;
    let d_rot = d_rot_z3(psi);
    let pts = model.disc_points(psi, center);
    let inv_n = 1.0 / pts.len() as f64;

    let mut d_state = [vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]];
    let mut d_psi = ZERO3;
    let mut velocity = ZERO3;

    for (p, &x) in pts.iter().enumerate() {
        let dx_dpsi = matvec(&d_rot, model.disc_template()[p]);

        // interpolated free stream
        let w = model.freestream_weights(x, state);
        let mut u_inf = ZERO3;
        for (wi, ui) in w.iter().zip(&state.freestream) {
            add_assign(&mut u_inf, scale(*ui, *wi));
        }
        add_assign(&mut velocity, scale(u_inf, inv_n));
        let mut du_inf_dx: Mat3 = [[0.0; 3]; 3];
        for (i, (&wi, &ui)) in w.iter().zip(&state.freestream).enumerate() {
            if wi == 0.0 {
                continue;
            }
            let diff = sub(ui, u_inf);
            let dw = scale(sub(x, state.positions[i]), 2.0 * FREESTREAM_DECAY * wi);
            for c in 0..nd {
                d_state[c][u_off + i * nd + c] += wi * inv_n;
                for d in 0..nd {
                    d_state[c][i * nd + d] += diff[c] * dw[d] * inv_n;
                    du_inf_dx[c][d] -= diff[c] * dw[d];
                }
            }
        }
        add_assign(&mut d_psi, scale(matvec(&du_inf_dx, dx_dpsi), inv_n));

        // induced velocity
        add_assign(&mut velocity, scale(model.induced_velocity(x, state), inv_n));
        for a in 0..cfg.rings {
            for j in 0..ne {
                let part = match element_partials(model, x, state, a, j) {
                    Ok(p) => p,
                    Err(e) if is_degenerate(&e) => {
                        diag.degenerate_pairs += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let (p1, p2) = model.element_points(a, j);
                for c in 0..nd {
                    let row = &mut d_state[c];
                    row[g_off + a * ne + j] += part.d_gamma[c] * inv_n;
                    for d in 0..nd {
                        row[p1 * nd + d] += part.d_p1[c][d] * inv_n;
                        row[p2 * nd + d] += part.d_p2[c][d] * inv_n;
                    }
                }
                add_assign(&mut d_psi, scale(matvec(&part.d_target, dx_dpsi), inv_n));
            }
        }
    }
    Ok(RotorJacobian {
        velocity,
        d_state,
        d_psi,
    })
}

/// The shed circulation of a step and its partials.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ShedPartials {
    pub gamma0: f64,
    pub d_state: Vec<f64>,
    pub d_a: f64,
    /// Total yaw derivative, including the rotation of the sampling disc.
    pub d_psi: f64,
}

pub(crate) fn shed_partials(
    model: &WakeModel,
    state: &StateVector,
    controls: &[f64],
    diag: &mut Diagnostics,
) -> Result<ShedPartials> {
    let cfg = model.config();
    let t = model.shedding_turbine();
    let (a, psi) = (controls[2 * t], controls[2 * t + 1]);
    let jac = rotor_velocity_jacobian(model, state, t, psi, diag)?;
    let n = rotor_normal(psi);
    let un = dot(jac.velocity, n);
    let h = cfg.time_step;
    let ct = thrust_coefficient(a, cfg.ct1)?;
    let coef = ct * un * h;
    Ok(ShedPartials {
        gamma0: ct * 0.5 * un * un * h,
        d_state: jac.project(scale(n, coef)),
        d_a: d_thrust_coefficient(a, cfg.ct1)? * 0.5 * un * un * h,
        d_psi: coef * (dot(jac.velocity, d_rotor_normal(psi)) + dot(n, jac.d_psi)),
    })
}

/// Power of `turbine` and its gradient with respect to the flat state,
/// including the saved-control entries.
pub(crate) fn output_partials(
    model: &WakeModel,
    state: &StateVector,
    turbine: usize,
    diag: &mut Diagnostics,
) -> Result<Vec<f64>> {
    let cfg = model.config();
    let (a, psi) = (state.induction(turbine), state.yaw(turbine));
    let jac = rotor_velocity_jacobian(model, state, turbine, psi, diag)?;
    let (d_ur, d_a, d_psi) = d_turbine_power(jac.velocity, a, psi, cfg.turbines[turbine].is_virtual, cfg.rotor_area)?;
    let mut row = jac.project(d_ur);
    row[cfg.m_index(turbine, 0)] += d_a;
    row[cfg.m_index(turbine, 1)] += d_psi + dot(d_ur, jac.d_psi);
    Ok(row)
}

/// `dg/dq`: one row per turbine over the flat state.
pub fn output_jacobian(model: &WakeModel, state: &StateVector) -> Result<DenseMatrix> {
    let cfg = model.config();
    state.check_layout(cfg)?;
    let mut diag = Diagnostics::default();
    let mut out = DenseMatrix::zeros(cfg.n_t(), cfg.state_size());
    for t in 0..cfg.n_t() {
        let row = output_partials(model, state, t, &mut diag)?;
        out.data[t * out.cols..(t + 1) * out.cols].copy_from_slice(&row);
    }
    Ok(out)
}

/// `lambda^T df/dq` for one step, evaluated from the stored state.
pub(crate) fn vjp_state(
    model: &WakeModel,
    state: &StateVector,
    shed: &ShedPartials,
    lam_next: &[f64],
    fault: Option<JacobianFault>,
    diag: &mut Diagnostics,
) -> Result<Vec<f64>> {
    let cfg = model.config();
    let nd = cfg.n_d();
    let np = cfg.points_per_ring();
    let ne = cfg.elements_per_ring;
    let h = cfg.time_step;
    let g_off = cfg.gamma_offset();
    let mut lam = vec![0.0; cfg.state_size()];

    for b in 1..cfg.rings {
        for i in 0..np {
            let row = cfg.x_index(b, i);
            let mut g = ZERO3;
            g[..nd].copy_from_slice(&lam_next[row..row + nd]);
            if g == ZERO3 {
                continue;
            }
            let src = (b - 1) * np + i;
            for d in 0..nd {
                lam[src * nd + d] += g[d];
                lam[cfg.u_index(b - 1, i) + d] += h * g[d];
            }
            let hg = scale(g, h);
            let x = state.positions[src];
            let target: Option<PointId> = Some((b - 1, i));
            let mut d_target = ZERO3;
            for a in 0..cfg.rings {
                for j in 0..ne {
                    if model.is_attached(target, a, j) {
                        continue;
                    }
                    let part = match element_partials(model, x, state, a, j) {
                        Ok(p) => p,
                        Err(e) if is_degenerate(&e) => {
                            diag.degenerate_pairs += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let (p1, p2) = model.element_points(a, j);
                    add_assign(&mut d_target, vecmat(hg, &part.d_target));
                    let v1 = vecmat(hg, &part.d_p1);
                    let v2 = vecmat(hg, &part.d_p2);
                    for d in 0..nd {
                        lam[p1 * nd + d] += v1[d];
                        lam[p2 * nd + d] += v2[d];
                    }
                    if fault != Some(JacobianFault::DropCirculationCoupling) {
                        lam[g_off + a * ne + j] += dot(hg, part.d_gamma);
                    }
                }
            }
            for d in 0..nd {
                lam[src * nd + d] += d_target[d];
            }
        }
    }

    for b in 1..cfg.rings {
        for j in 0..ne {
            lam[cfg.gamma_index(b - 1, j)] += lam_next[cfg.gamma_index(b, j)];
        }
        for i in 0..np {
            for d in 0..nd {
                lam[cfg.u_index(b - 1, i) + d] += lam_next[cfg.u_index(b, i) + d];
            }
        }
    }

    let s: f64 = (0..ne).map(|j| lam_next[cfg.gamma_index(0, j)]).sum();
    if s != 0.0 && fault != Some(JacobianFault::DropShedCoupling) {
        for (l, d) in lam.iter_mut().zip(&shed.d_state) {
            *l += s * d;
        }
    }
    Ok(lam)
}

/// `lambda^T df/dm` for one step.
pub(crate) fn vjp_control(model: &WakeModel, controls: &[f64], shed: &ShedPartials, lam_next: &[f64]) -> Vec<f64> {
    let cfg = model.config();
    let nd = cfg.n_d();
    let t = model.shedding_turbine();
    let mut g: Vec<f64> = lam_next[cfg.m_offset()..].to_vec();
    let d_rot = d_rot_z3(controls[2 * t + 1]);
    for (i, &p) in model.ring_template().iter().enumerate() {
        let dx = matvec(&d_rot, p);
        let row = cfg.x_index(0, i);
        g[2 * t + 1] += (0..nd).map(|d| lam_next[row + d] * dx[d]).sum::<f64>();
    }
    let s: f64 = (0..cfg.elements_per_ring)
        .map(|j| lam_next[cfg.gamma_index(0, j)])
        .sum();
    g[2 * t] += s * shed.d_a;
    g[2 * t + 1] += s * shed.d_psi;
    g
}

/// Dense Jacobians of one step.
#[derive(Debug, Clone)]
pub struct StepJacobians {
    /// `df/dq`, `n_s x n_s`.
    pub df_dq: DenseMatrix,
    /// `df/dm`, `n_s x n_c`.
    pub df_dm: DenseMatrix,
    pub diagnostics: Diagnostics,
}

/// Block-by-block assembly of `df/dq` and `df/dm` at `(state, controls)`.
///
/// Intended for small configurations: storage is `O(n_s^2)`. The free-stream
/// inflow of the new ring is a constant, so the scenario does not enter.
pub fn step_jacobians(model: &WakeModel, state: &StateVector, controls: &[f64]) -> Result<StepJacobians> {
    let cfg = model.config();
    state.check_layout(cfg)?;
    if controls.len() != cfg.n_controls() {
        return Err(FvwError::LayoutMismatch(format!(
            "expected {} controls, got {}",
            cfg.n_controls(),
            controls.len()
        )));
    }
    let nd = cfg.n_d();
    let np = cfg.points_per_ring();
    let ne = cfg.elements_per_ring;
    let h = cfg.time_step;
    let ns = cfg.state_size();
    let mut diag = Diagnostics::default();
    let mut fq = DenseMatrix::zeros(ns, ns);
    let mut fm = DenseMatrix::zeros(ns, cfg.n_controls());

    // convected positions
    for b in 1..cfg.rings {
        for i in 0..np {
            let row = cfg.x_index(b, i);
            let src = cfg.x_index(b - 1, i);
            let usrc = cfg.u_index(b - 1, i);
            let x = state.positions[(b - 1) * np + i];
            let mut diagonal: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for a in 0..cfg.rings {
                for j in 0..ne {
                    if model.is_attached(Some((b - 1, i)), a, j) {
                        continue;
                    }
                    let part = match element_partials(model, x, state, a, j) {
                        Ok(p) => p,
                        Err(e) if is_degenerate(&e) => {
                            diag.degenerate_pairs += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let (p1, p2) = model.element_points(a, j);
                    let gcol = cfg.gamma_index(a, j);
                    for c in 0..nd {
                        for d in 0..nd {
                            diagonal[c][d] += h * part.d_target[c][d];
                            fq.add(row + c, p1 * nd + d, h * part.d_p1[c][d]);
                            fq.add(row + c, p2 * nd + d, h * part.d_p2[c][d]);
                        }
                        fq.add(row + c, gcol, h * part.d_gamma[c]);
                    }
                }
            }
            for c in 0..nd {
                for d in 0..nd {
                    fq.add(row + c, src + d, diagonal[c][d]);
                }
                fq.add(row + c, usrc + c, h);
            }
        }
    }

    // inherited circulation and free stream
    for b in 1..cfg.rings {
        for j in 0..ne {
            fq.set(cfg.gamma_index(b, j), cfg.gamma_index(b - 1, j), 1.0);
        }
        for i in 0..np {
            for d in 0..nd {
                fq.set(cfg.u_index(b, i) + d, cfg.u_index(b - 1, i) + d, 1.0);
            }
        }
    }

    // new ring
    let t = model.shedding_turbine();
    let shed = shed_partials(model, state, controls, &mut diag)?;
    for j in 0..ne {
        let row = cfg.gamma_index(0, j);
        fq.data[row * ns..(row + 1) * ns].copy_from_slice(&shed.d_state);
        fm.set(row, 2 * t, shed.d_a);
        fm.set(row, 2 * t + 1, shed.d_psi);
    }
    let d_rot = d_rot_z3(controls[2 * t + 1]);
    for (i, &p) in model.ring_template().iter().enumerate() {
        let dx = matvec(&d_rot, p);
        for d in 0..nd {
            fm.set(cfg.x_index(0, i) + d, 2 * t + 1, dx[d]);
        }
    }
    for c in 0..cfg.n_controls() {
        fm.set(cfg.m_offset() + c, c, 1.0);
    }
    Ok(StepJacobians {
        df_dq: fq,
        df_dm: fm,
        diagnostics: diag,
    })
}
