use serde::{Deserialize, Serialize};

use crate::error::{FvwError, Result};

/// Horizon objective `sum_k Q y_k + dm_k^T R dm_k` with `dm_k = m_k - m_{k-1}`
/// taken over the free controls only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// `Q`, one weight per turbine; negative to maximise power.
    pub output_weights: Vec<f64>,
    /// `R`, an `n_m x n_m` matrix over the free controls.
    pub move_weights: Vec<Vec<f64>>,
    /// Horizon length `N_h` in steps.
    pub horizon: usize,
    /// Indices into the control vector `[a_0, psi_0, a_1, psi_1, ...]` that are optimised.
    pub free_controls: Vec<usize>,
}

impl ObjectiveConfig {
    /// Induction of the upstream turbine, total power of two turbines.
    pub fn induction_2d() -> Self {
        ObjectiveConfig {
            output_weights: vec![-1.0, -1.0],
            move_weights: vec![vec![10.0]],
            horizon: 100,
            free_controls: vec![0],
        }
    }

    /// Yaw of the upstream turbine, total power of two turbines.
    pub fn yaw_3d() -> Self {
        ObjectiveConfig {
            output_weights: vec![-1.0, -1.0],
            move_weights: vec![vec![0.025]],
            horizon: 60,
            free_controls: vec![1],
        }
    }

    pub fn n_m(&self) -> usize {
        self.free_controls.len()
    }

    pub fn validate(&self, n_t: usize, n_controls: usize) -> Result<()> {
        let bad = |msg: String| Err(FvwError::InvalidConfig(msg));
        if self.output_weights.len() != n_t {
            return bad(format!("Q needs {n_t} entries, got {}", self.output_weights.len()));
        }
        if self.output_weights.iter().any(|q| !(q.is_finite() && *q <= 0.0)) {
            return bad("output weights must be finite and non-positive".into());
        }
        let n_m = self.n_m();
        if self.free_controls.iter().any(|&i| i >= n_controls) {
            return bad(format!("free control index out of range (n_controls = {n_controls})"));
        }
        let mut sorted = self.free_controls.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n_m {
            return bad("free control indices must be distinct".into());
        }
        if self.move_weights.len() != n_m || self.move_weights.iter().any(|r| r.len() != n_m) {
            return bad(format!("R must be {n_m}x{n_m}"));
        }
        for i in 0..n_m {
            if !(self.move_weights[i][i] >= 0.0) {
                return bad("R must have a non-negative diagonal".into());
            }
            for j in 0..n_m {
                let (a, b) = (self.move_weights[i][j], self.move_weights[j][i]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * (a.abs() + b.abs()) {
                    return bad("R must be finite and symmetric".into());
                }
            }
        }
        Ok(())
    }

    fn moves(&self, m: &[f64], m_prev: &[f64]) -> Vec<f64> {
        self.free_controls.iter().map(|&i| m[i] - m_prev[i]).collect()
    }

    pub fn output_cost(&self, y: &[f64]) -> f64 {
        self.output_weights.iter().zip(y).map(|(q, y)| q * y).sum()
    }

    pub fn move_cost(&self, m: &[f64], m_prev: &[f64]) -> f64 {
        let dm = self.moves(m, m_prev);
        let r = &self.move_weights;
        let mut total = 0.0;
        for i in 0..dm.len() {
            for j in 0..dm.len() {
                total += dm[i] * r[i][j] * dm[j];
            }
        }
        total
    }

    /// `J_k` for one step.
    pub fn stage_cost(&self, y: &[f64], m: &[f64], m_prev: &[f64]) -> f64 {
        self.output_cost(y) + self.move_cost(m, m_prev)
    }

    /// `d(dm^T R dm)/dm` scattered onto the full control vector. The derivative
    /// with respect to `m_prev` is its negative.
    pub fn move_cost_gradient(&self, m: &[f64], m_prev: &[f64]) -> Vec<f64> {
        let dm = self.moves(m, m_prev);
        let r = &self.move_weights;
        let mut g = vec![0.0; m.len()];
        for (i, &ci) in self.free_controls.iter().enumerate() {
            g[ci] = (0..dm.len()).map(|j| 2.0 * r[i][j] * dm[j]).sum();
        }
        g
    }

    /// Total objective over a horizon of outputs `y_0..y_N` and controls
    /// `m_0..m_N`, where `prev_m` was implemented before the window.
    pub fn evaluate(&self, outputs: &[Vec<f64>], schedule: &[Vec<f64>], prev_m: &[f64]) -> Result<f64> {
        if outputs.len() != schedule.len() {
            return Err(FvwError::LayoutMismatch(format!(
                "{} outputs for {} controls",
                outputs.len(),
                schedule.len()
            )));
        }
        let mut prev = prev_m;
        let mut total = 0.0;
        for (y, m) in outputs.iter().zip(schedule) {
            total += self.stage_cost(y, m, prev);
            prev = m;
        }
        Ok(total)
    }

    /// Scale `Q` and `R` jointly.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.output_weights.iter_mut().for_each(|q| *q *= factor);
        out.move_weights.iter_mut().flatten().for_each(|r| *r *= factor);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_r(r: f64) -> ObjectiveConfig {
        ObjectiveConfig {
            output_weights: vec![0.0, 0.0],
            move_weights: vec![vec![r]],
            horizon: 2,
            free_controls: vec![0],
        }
    }

    #[test]
    fn move_penalty_arithmetic() {
        let obj = scalar_r(10.0);
        let schedule = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.1, 0.0, 0.0, 0.0],
            vec![0.1, 0.0, 0.0, 0.0],
        ];
        let outputs = vec![vec![1.0, 1.0]; 3];
        let j = obj.evaluate(&outputs, &schedule, &[0.0; 4]).unwrap();
        assert!((j - 0.1).abs() < 1e-15);
    }

    #[test]
    fn constant_schedule_is_pure_power() {
        let mut obj = ObjectiveConfig::induction_2d();
        obj.move_weights = vec![vec![123.0]];
        let m = vec![0.3, 0.0, 0.33, 0.0];
        let outputs = vec![vec![0.2, 0.1], vec![0.25, 0.05]];
        let j = obj.evaluate(&outputs, &[m.clone(), m.clone()], &m).unwrap();
        assert!((j + 0.6).abs() < 1e-15);
        assert!(obj.output_cost(&[0.2, 0.1]) > obj.output_cost(&[0.2, 0.11]));
    }

    #[test]
    fn move_gradient_matches_fd() {
        let obj = ObjectiveConfig {
            output_weights: vec![-1.0, -1.0],
            move_weights: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
            horizon: 1,
            free_controls: vec![0, 3],
        };
        obj.validate(2, 4).unwrap();
        let m = [0.3, 0.1, 0.2, -0.4];
        let p = [0.25, 0.0, 0.2, 0.1];
        let g = obj.move_cost_gradient(&m, &p);
        for i in 0..4 {
            let e = 1e-6;
            let mut mp = m;
            let mut mm = m;
            mp[i] += e;
            mm[i] -= e;
            let fd = (obj.move_cost(&mp, &p) - obj.move_cost(&mm, &p)) / (2.0 * e);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn validation_rejects_bad_weights() {
        let mut obj = ObjectiveConfig::induction_2d();
        assert!(obj.validate(2, 4).is_ok());
        obj.output_weights[0] = 1.0;
        assert!(obj.validate(2, 4).is_err());
        let mut obj = ObjectiveConfig::induction_2d();
        obj.free_controls = vec![7];
        assert!(obj.validate(2, 4).is_err());
    }
}
