use crate::error::{FvwError, Result};
use crate::linalg::Vec3;
use crate::model::config::ModelConfig;

/// Discrete model state `q = [X; Gamma; U; M]`.
///
/// Positions and stored free-stream velocities are kept as 3-vectors in both
/// dimensions; in 2D the z components are zero and excluded from the flat
/// layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    /// Element end points, ring-major (`n_r * n_p`).
    pub positions: Vec<Vec3>,
    /// Element circulations, ring-major (`n_r * n_e`).
    pub circulation: Vec<f64>,
    /// Free-stream velocity carried with each point (`n_r * n_p`).
    pub freestream: Vec<Vec3>,
    /// Controls applied in the previous step, `[a_0, psi_0, a_1, psi_1, ...]`.
    pub saved_controls: Vec<f64>,
}

impl StateVector {
    pub fn check_layout(&self, config: &ModelConfig) -> Result<()> {
        let np = config.n_points();
        let checks = [
            ("positions", self.positions.len(), np),
            ("circulation", self.circulation.len(), config.n_elements()),
            ("freestream", self.freestream.len(), np),
            ("saved controls", self.saved_controls.len(), config.n_controls()),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(FvwError::LayoutMismatch(format!(
                    "{name}: expected {want} entries, got {got}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().flatten().all(|v| v.is_finite())
            && self.circulation.iter().all(|v| v.is_finite())
            && self.freestream.iter().flatten().all(|v| v.is_finite())
            && self.saved_controls.iter().all(|v| v.is_finite())
    }

    /// Flat `[X | Gamma | U | M]` vector of length `n_s`.
    pub fn to_flat(&self, config: &ModelConfig) -> Vec<f64> {
        let nd = config.n_d();
        let mut out = Vec::with_capacity(config.state_size());
        out.extend(self.positions.iter().flat_map(|p| p[..nd].iter().copied()));
        out.extend_from_slice(&self.circulation);
        out.extend(self.freestream.iter().flat_map(|p| p[..nd].iter().copied()));
        out.extend_from_slice(&self.saved_controls);
        out
    }

    pub fn from_flat(config: &ModelConfig, flat: &[f64]) -> Result<Self> {
        if flat.len() != config.state_size() {
            return Err(FvwError::LayoutMismatch(format!(
                "flat state has {} entries, layout needs {}",
                flat.len(),
                config.state_size()
            )));
        }
        let nd = config.n_d();
        let np = config.n_points();
        let vecs = |slice: &[f64]| -> Vec<Vec3> {
            slice
                .chunks_exact(nd)
                .map(|c| {
                    let mut v = [0.0; 3];
                    v[..nd].copy_from_slice(c);
                    v
                })
                .collect()
        };
        let (x, rest) = flat.split_at(np * nd);
        let (gamma, rest) = rest.split_at(config.n_elements());
        let (u, m) = rest.split_at(np * nd);
        Ok(StateVector {
            positions: vecs(x),
            circulation: gamma.to_vec(),
            freestream: vecs(u),
            saved_controls: m.to_vec(),
        })
    }

    pub fn induction(&self, turbine: usize) -> f64 {
        self.saved_controls[2 * turbine]
    }

    pub fn yaw(&self, turbine: usize) -> f64 {
        self.saved_controls[2 * turbine + 1]
    }
}
