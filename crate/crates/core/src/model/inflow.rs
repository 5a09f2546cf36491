use serde::{Deserialize, Serialize};

use crate::error::{FvwError, Result};
use crate::linalg::Vec3;
use crate::model::rotor::rotor_normal;

/// Free-stream velocity as a function of the time step.
///
/// Directions are angles in the yaw convention, so a turbine with yaw equal to
/// the direction faces the wind: the velocity is `magnitude * n(direction)`.
/// Spatially uniform in both variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InflowScenario {
    Uniform {
        magnitude: f64,
        /// radians
        direction: f64,
    },
    /// Cosine-smoothed change of wind direction.
    Rotating {
        magnitude: f64,
        /// Time at which the ramp starts, in `D / u_inf` units.
        start_time: f64,
        /// Ramp duration in `D / u_inf` units.
        duration: f64,
        /// radians
        from_angle: f64,
        /// radians
        to_angle: f64,
    },
}

impl Default for InflowScenario {
    fn default() -> Self {
        InflowScenario::unit()
    }
}

impl InflowScenario {
    pub fn unit() -> Self {
        InflowScenario::Uniform {
            magnitude: 1.0,
            direction: 0.0,
        }
    }

    /// Unit wind turning from 0 to -20 degrees over 10 time units, starting at t = 5.
    pub fn rotating_default() -> Self {
        InflowScenario::Rotating {
            magnitude: 1.0,
            start_time: 5.0,
            duration: 10.0,
            from_angle: 0.0,
            to_angle: (-20.0f64).to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (mag, ok) = match *self {
            InflowScenario::Uniform { magnitude, direction } => (magnitude, direction.is_finite()),
            InflowScenario::Rotating {
                magnitude,
                start_time,
                duration,
                from_angle,
                to_angle,
            } => (
                magnitude,
                start_time.is_finite() && duration > 0.0 && from_angle.is_finite() && to_angle.is_finite(),
            ),
        };
        if mag > 0.0 && mag.is_finite() && ok {
            Ok(())
        } else {
            Err(FvwError::InvalidConfig(format!("invalid inflow scenario {self:?}")))
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            InflowScenario::Uniform { magnitude, .. } | InflowScenario::Rotating { magnitude, .. } => magnitude,
        }
    }

    /// Wind direction at time `t`.
    pub fn direction_at_time(&self, t: f64) -> f64 {
        match *self {
            InflowScenario::Uniform { direction, .. } => direction,
            InflowScenario::Rotating {
                start_time,
                duration,
                from_angle,
                to_angle,
                ..
            } => {
                let s = ((t - start_time) / duration).clamp(0.0, 1.0);
                from_angle + (to_angle - from_angle) * 0.5 * (1.0 - (std::f64::consts::PI * s).cos())
            }
        }
    }

    pub fn direction(&self, k: usize, h: f64) -> f64 {
        self.direction_at_time(k as f64 * h)
    }

    pub fn velocity(&self, k: usize, h: f64) -> Vec3 {
        let n = rotor_normal(self.direction(k, h));
        let m = self.magnitude();
        [m * n[0], m * n[1], m * n[2]]
    }

    /// Uniform scenario holding the wind of step `k`, used for spin-up.
    pub fn frozen_at(&self, k: usize, h: f64) -> InflowScenario {
        InflowScenario::Uniform {
            magnitude: self.magnitude(),
            direction: self.direction(k, h),
        }
    }
}
