//! Discrete-time free-vortex wake model `q_{k+1} = f(q_k, m_k)`, `y_k = g(q_k)`.

pub mod config;
pub mod geometry;
pub mod inflow;
pub mod rotor;
pub mod snapshot;
pub mod state;

pub use config::{two_turbines, ModelConfig, Turbine, CONTROLS_PER_TURBINE};
pub use inflow::InflowScenario;
pub use state::StateVector;

use crate::error::{FvwError, Result};
use crate::kernels::{induced_velocity_2d, induced_velocity_3d, Dimension};
use crate::linalg::{add, add_assign, norm_sq, scale, sub, Vec3, ZERO3};

/// Decay rate of the Gaussian distance weights of the free-stream estimate.
pub const FREESTREAM_DECAY: f64 = 10.0;

/// Identifies a wake point `(ring, point)`.
pub type PointId = (usize, usize);

/// A free-vortex wake with one shedding turbine and any number of virtual ones.
#[derive(Debug, Clone)]
pub struct WakeModel {
    config: ModelConfig,
    shedding: usize,
    ring_template: Vec<Vec3>,
    disc_template: Vec<Vec3>,
    /// Disc samples grouped with their mirror partner under `y -> -y`.
    disc_pairs: Vec<(usize, Option<usize>)>,
}

impl WakeModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let shedding = config.shedding_turbine()?;
        let ring_template = geometry::ring_template(config.dimension, config.elements_per_ring);
        let disc_template = geometry::disc_template(config.dimension, config.disc_points);
        let disc_pairs = geometry::mirror_pairs(&disc_template);
        Ok(WakeModel {
            config,
            shedding,
            ring_template,
            disc_template,
            disc_pairs,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shedding_turbine(&self) -> usize {
        self.shedding
    }

    pub(crate) fn ring_template(&self) -> &[Vec3] {
        &self.ring_template
    }

    pub(crate) fn disc_template(&self) -> &[Vec3] {
        &self.disc_template
    }

    /// Sign applied to an element's stored circulation. The two 2D vortex
    /// points of a ring carry opposite rotation (the slice through a ring).
    #[inline]
    pub(crate) fn element_sign(&self, element: usize) -> f64 {
        match self.config.dimension {
            Dimension::Two if element % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }

    /// Point indices bounding element `j` of ring `a` (the second equals the
    /// first in 2D).
    #[inline]
    pub(crate) fn element_points(&self, ring: usize, element: usize) -> (usize, usize) {
        let base = ring * self.config.points_per_ring();
        match self.config.dimension {
            Dimension::Two => (base + element, base + element),
            Dimension::Three => (base + element, base + element + 1),
        }
    }

    /// Whether element `(ring, element)` is attached to wake point `target`.
    /// Such pairs are identically zero in the regularised kernel and are skipped.
    #[inline]
    pub(crate) fn is_attached(&self, target: Option<PointId>, ring: usize, element: usize) -> bool {
        let Some((b, i)) = target else { return false };
        if b != ring {
            return false;
        }
        let ne = self.config.elements_per_ring;
        match self.config.dimension {
            Dimension::Two => element == i,
            Dimension::Three => {
                element == i || element + 1 == i || (i == 0 && element == ne - 1) || (i == ne && element == 0)
            }
        }
    }

    pub fn empty_state(&self, controls: &[f64], inflow: &InflowScenario) -> Result<StateVector> {
        let cfg = &self.config;
        if controls.len() != cfg.n_controls() {
            return Err(FvwError::LayoutMismatch(format!(
                "expected {} controls, got {}",
                cfg.n_controls(),
                controls.len()
            )));
        }
        let u_inf = inflow.velocity(0, cfg.time_step);
        let ring0 = self.new_ring_positions(controls[2 * self.shedding + 1]);
        let mut positions = Vec::with_capacity(cfg.n_points());
        for b in 0..cfg.rings {
            let shift = scale(u_inf, b as f64 * cfg.time_step);
            positions.extend(ring0.iter().map(|&p| add(p, shift)));
        }
        Ok(StateVector {
            positions,
            circulation: vec![0.0; cfg.n_elements()],
            freestream: vec![u_inf; cfg.n_points()],
            saved_controls: controls.to_vec(),
        })
    }

    /// Points of a freshly shed ring for yaw `psi`, at the shedding turbine.
    pub fn new_ring_positions(&self, psi: f64) -> Vec<Vec3> {
        geometry::place(&self.ring_template, psi, self.config.turbines[self.shedding].position)
    }

    /// Rotor sampling points for yaw `psi` centred at `center`.
    pub fn disc_points(&self, psi: f64, center: Vec3) -> Vec<Vec3> {
        geometry::place(&self.disc_template, psi, center)
    }

    /// Total induced velocity at `x`: the sum over all elements of all rings.
    pub fn induced_velocity(&self, x: Vec3, state: &StateVector) -> Vec3 {
        self.induced_velocity_at(x, state, None)
    }

    pub(crate) fn induced_velocity_at(&self, x: Vec3, state: &StateVector, target: Option<PointId>) -> Vec3 {
        let cfg = &self.config;
        let sigma = cfg.core_size;
        let mut u = ZERO3;
        for a in 0..cfg.rings {
            // the pair of a 2D ring is summed first, which keeps mirrored
            // configurations bitwise mirrored
            let mut ring = ZERO3;
            for j in 0..cfg.elements_per_ring {
                let gamma = state.circulation[a * cfg.elements_per_ring + j];
                if gamma == 0.0 || self.is_attached(target, a, j) {
                    continue;
                }
                let (p1, p2) = self.element_points(a, j);
                match cfg.dimension {
                    Dimension::Two => {
                        let s = state.positions[p1];
                        let v = induced_velocity_2d([x[0], x[1]], [s[0], s[1]], self.element_sign(j) * gamma, sigma);
                        ring[0] += v[0];
                        ring[1] += v[1];
                    }
                    Dimension::Three => {
                        let v = induced_velocity_3d(x, state.positions[p1], state.positions[p2], gamma, sigma);
                        add_assign(&mut ring, v);
                    }
                }
            }
            add_assign(&mut u, ring);
        }
        u
    }

    /// Normalised Gaussian weights `exp(-10 |x - x_p|^2)` over all stored points.
    ///
    /// Evaluated relative to the nearest point so the weights never underflow
    /// as a whole; normalisation removes the shift.
    pub(crate) fn freestream_weights(&self, x: Vec3, state: &StateVector) -> Vec<f64> {
        let d2: Vec<f64> = state.positions.iter().map(|&p| norm_sq(sub(x, p))).collect();
        let d_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let mut w: Vec<f64> = d2.iter().map(|&d| (-FREESTREAM_DECAY * (d - d_min)).exp()).collect();
        let total: f64 = w
            .chunks(self.config.points_per_ring())
            .map(|ring| ring.iter().sum::<f64>())
            .sum();
        if total > 0.0 && total.is_finite() {
            w.iter_mut().for_each(|v| *v /= total);
        } else {
            let n = w.len() as f64;
            w.iter_mut().for_each(|v| *v = 1.0 / n);
        }
        w
    }

    /// Local free-stream velocity interpolated from the stored point velocities.
    pub fn freestream_at(&self, x: Vec3, state: &StateVector) -> Vec3 {
        let w = self.freestream_weights(x, state);
        let np = self.config.points_per_ring();
        let mut u = ZERO3;
        for (wr, ur) in w.chunks(np).zip(state.freestream.chunks(np)) {
            let mut ring = ZERO3;
            for (wi, ui) in wr.iter().zip(ur) {
                add_assign(&mut ring, scale(*ui, *wi));
            }
            add_assign(&mut u, ring);
        }
        u
    }

    /// Free-stream plus induced velocity.
    pub fn flow_velocity(&self, x: Vec3, state: &StateVector) -> Vec3 {
        add(self.freestream_at(x, state), self.induced_velocity(x, state))
    }

    /// Disc-averaged velocity of `turbine` with its rotor yawed to `psi`.
    ///
    /// For virtual turbines the power evaluation additionally scales this by
    /// `1 - a`.
    pub fn rotor_velocity(&self, state: &StateVector, turbine: usize, psi: f64) -> Vec3 {
        let pts = self.disc_points(psi, self.config.turbines[turbine].position);
        let n = pts.len() as f64;
        let mut u = ZERO3;
        for &(i, partner) in &self.disc_pairs {
            let mut v = self.flow_velocity(pts[i], state);
            if let Some(j) = partner {
                v = add(v, self.flow_velocity(pts[j], state));
            }
            add_assign(&mut u, v);
        }
        scale(u, 1.0 / n)
    }

    /// Circulation of the next shed ring for controls `m` on state `q_k`.
    pub fn shed_circulation(&self, state: &StateVector, controls: &[f64]) -> Result<f64> {
        let (a, psi) = (controls[2 * self.shedding], controls[2 * self.shedding + 1]);
        let u_r = self.rotor_velocity(state, self.shedding, psi);
        rotor::shed_circulation(a, psi, u_r, self.config.time_step, self.config.ct1)
    }

    /// Advance one step: convect rings `0..n_r-1` one slot downstream, shed a
    /// new ring 0 and store the applied controls.
    pub fn step(
        &self,
        state: &StateVector,
        controls: &[f64],
        inflow: &InflowScenario,
        k: usize,
    ) -> Result<StateVector> {
        let cfg = &self.config;
        state.check_layout(cfg)?;
        if controls.len() != cfg.n_controls() {
            return Err(FvwError::LayoutMismatch(format!(
                "expected {} controls, got {}",
                cfg.n_controls(),
                controls.len()
            )));
        }
        let np = cfg.points_per_ring();
        let ne = cfg.elements_per_ring;
        let h = cfg.time_step;
        let gamma0 = self.shed_circulation(state, controls)?;

        let mut next = state.clone();
        for b in 1..cfg.rings {
            for i in 0..np {
                let src = (b - 1) * np + i;
                let x = state.positions[src];
                let u = add(
                    state.freestream[src],
                    self.induced_velocity_at(x, state, Some((b - 1, i))),
                );
                next.positions[b * np + i] = add(x, scale(u, h));
            }
        }
        // rings shift by one slot; the oldest is dropped
        next.circulation.copy_within(0..(cfg.rings - 1) * ne, ne);
        next.freestream.copy_within(0..(cfg.rings - 1) * np, np);

        let psi = controls[2 * self.shedding + 1];
        let u_inf = inflow.velocity(k, h);
        for (i, p) in self.new_ring_positions(psi).into_iter().enumerate() {
            next.positions[i] = p;
            next.freestream[i] = u_inf;
        }
        next.circulation[..ne].iter_mut().for_each(|g| *g = gamma0);
        next.saved_controls.copy_from_slice(controls);

        if !next.is_finite() {
            return Err(FvwError::NonFinite { step: k });
        }
        Ok(next)
    }

    /// Power of every turbine, evaluated with the controls saved in the state.
    pub fn output(&self, state: &StateVector) -> Result<Vec<f64>> {
        (0..self.config.n_t()).map(|t| self.turbine_power(state, t)).collect()
    }

    pub fn turbine_power(&self, state: &StateVector, turbine: usize) -> Result<f64> {
        let (a, psi) = (state.induction(turbine), state.yaw(turbine));
        let u_r = self.rotor_velocity(state, turbine, psi);
        rotor::turbine_power(
            u_r,
            a,
            psi,
            self.config.turbines[turbine].is_virtual,
            self.config.rotor_area,
        )
    }

    /// Run `n_steps` steps from the empty wake under constant controls.
    pub fn spin_up(&self, inflow: &InflowScenario, controls: &[f64], n_steps: usize) -> Result<StateVector> {
        let mut state = self.empty_state(controls, inflow)?;
        for k in 0..n_steps {
            state = self.step(&state, controls, inflow, k)?;
        }
        Ok(state)
    }

    /// Default spin-up length, three wake lengths of steps.
    pub fn default_spin_up_steps(&self) -> usize {
        3 * self.config.rings
    }
}

/// Control vector for `n_t` turbines with the given induction and yaw.
pub fn uniform_controls(n_t: usize, a: f64, psi: f64) -> Vec<f64> {
    (0..n_t).flat_map(|_| [a, psi]).collect()
}
