use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AdamConfig, EmpcConfig, ObjectiveConfig};
use crate::error::{FvwError, Result};
use crate::kernels::Dimension;
use crate::model::{InflowScenario, ModelConfig, Turbine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Preset {
    #[default]
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

/// Model fields that override the preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements_per_ring: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotor_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbines: Option<Vec<Turbine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ct1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_controls: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpcOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_controls: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_up_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_yaw_tracks_wind: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Random perturbation of the first schedule, degrees for yaw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    /// Start of the window for mean-power statistics, in time units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induction_grid: Option<Vec<f64>>,
    /// Degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_grid: Option<Vec<f64>>,
    /// Induction of the downstream turbine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream_induction: Option<f64>,
    /// Upstream induction during a yaw sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_induction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_up_steps: Option<usize>,
    /// Number of final spin-up steps averaged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_induction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream_induction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core_sizes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements_per_ring: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowfieldOverrides {
    /// `[min, max]` in x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    /// Heights averaged over in 3D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_levels: Option<Vec<f64>>,
}

/// An experiment description as read from JSON. Absent fields take the
/// values of the preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub preset: Preset,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<InflowScenario>,
    #[serde(default)]
    pub objective: ObjectiveOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamConfig>,
    #[serde(default)]
    pub empc: EmpcOverrides,
    #[serde(default)]
    pub sweep: SweepOverrides,
    #[serde(default)]
    pub convergence: ConvergenceOverrides,
    #[serde(default)]
    pub flowfield: FlowfieldOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        ExperimentConfig {
            preset,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FvwError::InvalidConfig(format!("experiment configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FvwError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    /// Fill in every absent field from the preset and validate the result.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        let three = self.preset == Preset::ThreeD;
        let mut model = if three {
            ModelConfig::reference_3d()
        } else {
            ModelConfig::reference_2d()
        };
        let o = &self.model;
        model.rings = o.rings.unwrap_or(model.rings);
        model.elements_per_ring = o.elements_per_ring.unwrap_or(model.elements_per_ring);
        model.time_step = o.time_step.unwrap_or(model.time_step);
        model.core_size = o.core_size.unwrap_or(model.core_size);
        model.disc_points = o.disc_points.unwrap_or(model.disc_points);
        model.rotor_area = o.rotor_area.unwrap_or(model.rotor_area);
        model.ct1 = o.ct1.unwrap_or(model.ct1);
        if let Some(t) = &o.turbines {
            model.turbines = t.clone();
        }
        model.validate()?;

        let scenario = self.scenario.clone().unwrap_or_else(|| {
            if three {
                InflowScenario::rotating_default()
            } else {
                InflowScenario::unit()
            }
        });
        scenario.validate()?;

        let mut objective = if three {
            ObjectiveConfig::yaw_3d()
        } else {
            ObjectiveConfig::induction_2d()
        };
        let oo = &self.objective;
        if let Some(q) = &oo.output_weights {
            objective.output_weights = q.clone();
        } else if model.n_t() != 2 {
            objective.output_weights = vec![-1.0; model.n_t()];
        }
        if let Some(r) = &oo.move_weights {
            objective.move_weights = r.clone();
        }
        objective.horizon = oo.horizon.unwrap_or(objective.horizon);
        if let Some(f) = &oo.free_controls {
            objective.free_controls = f.clone();
        }
        objective.validate(model.n_t(), model.n_controls())?;

        let adam = self.optimizer.clone().unwrap_or_default();
        adam.validate()?;

        let mut empc = if three {
            EmpcConfig::yaw_3d()
        } else {
            EmpcConfig::induction_2d()
        };
        let eo = &self.empc;
        empc.steps = eo.steps.unwrap_or(empc.steps);
        empc.iterations = eo.iterations.unwrap_or(empc.iterations);
        if let Some(m) = &eo.initial_controls {
            empc.initial_controls = m.clone();
        } else if model.n_t() != 2 {
            empc.initial_controls = (0..model.n_t()).flat_map(|_| [0.33, 0.0]).collect();
        }
        empc.spin_up_steps = eo.spin_up_steps.or(empc.spin_up_steps);
        empc.virtual_yaw_tracks_wind = eo.virtual_yaw_tracks_wind.unwrap_or(empc.virtual_yaw_tracks_wind);
        empc.snapshot_every = eo.snapshot_every.or(empc.snapshot_every);
        empc.perturbation = eo.perturbation.unwrap_or(empc.perturbation);
        empc.seed = self.seed;
        empc.validate(model.n_controls())?;
        // final two-thirds of the 2D run, after the wind change in 3D
        let mean_after = eo.mean_after.unwrap_or(20.0);
        if !mean_after.is_finite() {
            return Err(FvwError::InvalidConfig("mean_after must be finite".into()));
        }

        let so = &self.sweep;
        let sweep = SweepSettings {
            induction_grid: so.induction_grid.clone().unwrap_or_else(default_induction_grid),
            yaw_grid_deg: so.yaw_grid.clone().unwrap_or_else(default_yaw_grid),
            downstream_induction: so.downstream_induction.unwrap_or(0.33),
            upstream_induction: so.upstream_induction.unwrap_or(0.33),
            spin_up_steps: so.spin_up_steps.unwrap_or(3 * model.rings),
            average_steps: so.average_steps.unwrap_or(20),
        };
        sweep.validate()?;

        let co = &self.convergence;
        let convergence = ConvergenceSettings {
            upstream_induction: co.upstream_induction.unwrap_or(0.3),
            downstream_induction: co.downstream_induction.unwrap_or(0.33),
            time_steps: co.time_steps.clone().unwrap_or_else(|| {
                if three {
                    vec![0.2, 0.3, 0.4]
                } else {
                    vec![0.1, 0.2, 0.3]
                }
            }),
            core_sizes: co.core_sizes.clone().unwrap_or_else(|| {
                if three {
                    vec![0.1, 0.16, 0.24]
                } else {
                    vec![0.05, 0.1, 0.2]
                }
            }),
            rings: co
                .rings
                .clone()
                .unwrap_or_else(|| if three { vec![30, 40, 50] } else { vec![40, 60, 80] }),
            elements_per_ring: co.elements_per_ring.clone().unwrap_or_else(|| {
                if three {
                    vec![8, 12, 16, 24]
                } else {
                    vec![2]
                }
            }),
        };

        let fo = &self.flowfield;
        let flowfield = FlowfieldSettings {
            x_range: fo.x_range.unwrap_or([-1.0, 8.0]),
            y_range: fo.y_range.unwrap_or([-2.0, 2.0]),
            nx: fo.nx.unwrap_or(240),
            ny: fo.ny.unwrap_or(80),
            z_levels: fo.z_levels.clone().unwrap_or_else(|| {
                if model.dimension == Dimension::Three {
                    vec![-0.4, -0.2, 0.0, 0.2, 0.4]
                } else {
                    vec![0.0]
                }
            }),
        };
        flowfield.validate()?;

        Ok(ResolvedExperiment {
            model,
            scenario,
            objective,
            adam,
            empc,
            mean_after,
            sweep,
            convergence,
            flowfield,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            seed: self.seed,
        })
    }
}

/// Induction 0 to 0.5 in steps of 0.025, plus the greedy 0.33.
pub fn default_induction_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=20).map(|i| i as f64 * 0.025).collect();
    g.push(0.33);
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g
}

/// Yaw -45 to 45 degrees in steps of 5.
pub fn default_yaw_grid() -> Vec<f64> {
    (0..19).map(|i| -45.0 + 5.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub induction_grid: Vec<f64>,
    pub yaw_grid_deg: Vec<f64>,
    pub downstream_induction: f64,
    pub upstream_induction: f64,
    pub spin_up_steps: usize,
    pub average_steps: usize,
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FvwError::InvalidConfig(m.into()));
        if self.induction_grid.iter().any(|a| !(0.0..=0.5).contains(a)) {
            return bad("induction grid must lie in [0, 0.5]");
        }
        if self.yaw_grid_deg.iter().any(|p| !(-45.0..=45.0).contains(p)) {
            return bad("yaw grid must lie in [-45, 45] degrees");
        }
        for g in [&self.induction_grid, &self.yaw_grid_deg] {
            if g.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("sweep grids must be strictly increasing");
            }
        }
        if self.average_steps == 0 || self.average_steps > self.spin_up_steps {
            return bad("averaging window must be non-empty and within the spin-up");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub upstream_induction: f64,
    pub downstream_induction: f64,
    pub time_steps: Vec<f64>,
    pub core_sizes: Vec<f64>,
    pub rings: Vec<usize>,
    pub elements_per_ring: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowfieldSettings {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub z_levels: Vec<f64>,
}

impl FlowfieldSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.nx >= 1
            && self.ny >= 1
            && self.x_range[0] <= self.x_range[1]
            && self.y_range[0] <= self.y_range[1]
            && !self.z_levels.is_empty()
            && self
                .x_range
                .iter()
                .chain(&self.y_range)
                .chain(&self.z_levels)
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(FvwError::InvalidConfig(format!("invalid flow-field grid {self:?}")))
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_range[0], self.x_range[1], self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y_range[0], self.y_range[1], self.ny)
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExperiment {
    pub model: ModelConfig,
    pub scenario: InflowScenario,
    pub objective: ObjectiveConfig,
    pub adam: AdamConfig,
    pub empc: EmpcConfig,
    pub mean_after: f64,
    pub sweep: SweepSettings,
    pub convergence: ConvergenceSettings,
    pub flowfield: FlowfieldSettings,
    pub output_dir: PathBuf,
    pub seed: u64,
}
