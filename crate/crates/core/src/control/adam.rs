use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{FvwError, Result};

pub const INDUCTION_BOUNDS: (f64, f64) = (0.0, 0.5);
pub const YAW_BOUNDS: (f64, f64) = (-FRAC_PI_2, FRAC_PI_2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    /// Maximum step in the scaled parameters.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Yaw is optimised as `yaw_scale * psi` with `psi` in degrees.
    pub yaw_scale: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            yaw_scale: 1e-2,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.yaw_scale > 0.0
            && self.alpha.is_finite()
            && self.yaw_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(FvwError::InvalidConfig(format!("invalid optimiser settings {self:?}")))
        }
    }

    /// Parameter per physical unit of control `index` (even: induction, odd: yaw in radians).
    pub fn scale_of(&self, index: usize) -> f64 {
        if index % 2 == 1 {
            self.yaw_scale * 180.0 / std::f64::consts::PI
        } else {
            1.0
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied so far.
    pub t: u32,
}

impl AdamMoments {
    pub fn new(n: usize) -> Self {
        AdamMoments {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` (minimisation).
pub fn adam_step(cfg: &AdamConfig, params: &mut [f64], grad: &[f64], moments: &mut AdamMoments) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), moments.m.len());
    moments.t += 1;
    let t = moments.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.m[i] / c1;
        let v_hat = moments.v[i] / c2;
        params[i] -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Project a control vector `[a_0, psi_0, ...]` onto the admissible box.
pub fn clamp_controls(m: &mut [f64]) {
    for (i, v) in m.iter_mut().enumerate() {
        let (lo, hi) = if i % 2 == 0 { INDUCTION_BOUNDS } else { YAW_BOUNDS };
        *v = v.clamp(lo, hi);
    }
}

/// Adam update of the free entries of a schedule. The gradient is given in
/// physical units; each entry is moved in its scaled parameter and clamped.
pub fn update_schedule(
    cfg: &AdamConfig,
    schedule: &mut [Vec<f64>],
    gradient: &[Vec<f64>],
    free: &[usize],
    moments: &mut AdamMoments,
) {
    let mut z = Vec::with_capacity(moments.m.len());
    let mut g = Vec::with_capacity(moments.m.len());
    for (m, gk) in schedule.iter().zip(gradient) {
        for (j, &c) in free.iter().enumerate() {
            let s = cfg.scale_of(c);
            z.push(m[c] * s);
            g.push(gk[j] / s);
        }
    }
    adam_step(cfg, &mut z, &g, moments);
    let mut it = z.into_iter();
    for m in schedule.iter_mut() {
        for &c in free {
            m[c] = it.next().unwrap() / cfg.scale_of(c);
        }
        clamp_controls(m);
    }
}
