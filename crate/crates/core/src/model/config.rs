use serde::{Deserialize, Serialize};

use crate::error::{FvwError, Result};
use crate::kernels::Dimension;
use crate::linalg::Vec3;
use crate::model::rotor::CT1_DEFAULT;

/// Controls per turbine: axial induction and yaw.
pub const CONTROLS_PER_TURBINE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turbine {
    pub position: Vec3,
    /// Virtual turbines are evaluated from the flow without shedding vorticity.
    pub is_virtual: bool,
}

/// Dimensionality and discretisation of the wake model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: Dimension,
    /// Number of rings `n_r`; ring 0 is the newest, at the rotor.
    pub rings: usize,
    /// Elements per ring `n_e`.
    pub elements_per_ring: usize,
    /// Time step `h` in units of `D / u_inf`.
    pub time_step: f64,
    /// Gaussian core size in rotor diameters.
    pub core_size: f64,
    /// Number of rotor sampling points `n_u`.
    pub disc_points: usize,
    pub rotor_area: f64,
    pub turbines: Vec<Turbine>,
    pub ct1: f64,
}

impl ModelConfig {
    /// Two-turbine 2D case: h = 0.2, sigma = 0.1, 60 rings of 2 vortex points.
    pub fn reference_2d() -> Self {
        ModelConfig {
            dimension: Dimension::Two,
            rings: 60,
            elements_per_ring: 2,
            time_step: 0.2,
            core_size: 0.1,
            disc_points: 9,
            rotor_area: 1.0,
            turbines: two_turbines(5.0),
            ct1: CT1_DEFAULT,
        }
    }

    /// Two-turbine 3D case: h = 0.3, sigma = 0.16, 40 rings of 16 filaments.
    pub fn reference_3d() -> Self {
        ModelConfig {
            dimension: Dimension::Three,
            rings: 40,
            elements_per_ring: 16,
            time_step: 0.3,
            core_size: 0.16,
            disc_points: 64,
            rotor_area: std::f64::consts::FRAC_PI_4,
            turbines: two_turbines(5.0),
            ct1: CT1_DEFAULT,
        }
    }

    pub fn n_d(&self) -> usize {
        self.dimension.n_d()
    }

    /// Points per ring: `n_e` in 2D, `n_e + 1` in 3D (the last closes the ring).
    pub fn points_per_ring(&self) -> usize {
        match self.dimension {
            Dimension::Two => self.elements_per_ring,
            Dimension::Three => self.elements_per_ring + 1,
        }
    }

    pub fn n_t(&self) -> usize {
        self.turbines.len()
    }

    pub fn n_controls(&self) -> usize {
        self.n_t() * CONTROLS_PER_TURBINE
    }

    pub fn n_points(&self) -> usize {
        self.rings * self.points_per_ring()
    }

    pub fn n_elements(&self) -> usize {
        self.rings * self.elements_per_ring
    }

    /// `n_s = 2 n_r n_p n_d + n_r n_e + n_t n_c`.
    pub fn state_size(&self) -> usize {
        2 * self.rings * self.points_per_ring() * self.n_d()
            + self.rings * self.elements_per_ring
            + self.n_t() * CONTROLS_PER_TURBINE
    }

    /// Index of the unique turbine that sheds vorticity.
    pub fn shedding_turbine(&self) -> Result<usize> {
        let mut shedding = self.turbines.iter().enumerate().filter(|(_, t)| !t.is_virtual);
        match (shedding.next(), shedding.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(FvwError::InvalidConfig("no shedding (non-virtual) turbine".into())),
            _ => Err(FvwError::InvalidConfig(
                "only a single shedding turbine can be modelled; mark the others virtual".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FvwError::InvalidConfig(msg));
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return bad(format!("time step must be positive, got {}", self.time_step));
        }
        if !(self.core_size > 0.0 && self.core_size.is_finite()) {
            return bad(format!("core size must be positive, got {}", self.core_size));
        }
        if self.rings < 2 {
            return bad(format!("at least two rings are required, got {}", self.rings));
        }
        match self.dimension {
            Dimension::Two if self.elements_per_ring != 2 => {
                return bad("the 2D model sheds exactly two vortex points per ring".into())
            }
            Dimension::Three if self.elements_per_ring < 3 => {
                return bad("a 3D ring needs at least three filaments".into())
            }
            _ => {}
        }
        if self.disc_points == 0 {
            return bad("at least one rotor sampling point is required".into());
        }
        if !(self.rotor_area > 0.0 && self.rotor_area.is_finite()) {
            return bad(format!("rotor area must be positive, got {}", self.rotor_area));
        }
        if !(self.ct1 > 1.0 && self.ct1 < 4.0) {
            return bad(format!("ct1 must lie in (1, 4), got {}", self.ct1));
        }
        for t in &self.turbines {
            if t.position.iter().any(|v| !v.is_finite()) {
                return bad("turbine positions must be finite".into());
            }
            if self.dimension == Dimension::Two && t.position[2] != 0.0 {
                return bad("2D turbine positions must have a zero z component".into());
            }
        }
        self.shedding_turbine()?;
        Ok(())
    }

    // Flat state layout [X | Gamma | U | M], ring-major.

    pub fn x_index(&self, ring: usize, point: usize) -> usize {
        (ring * self.points_per_ring() + point) * self.n_d()
    }

    pub fn gamma_offset(&self) -> usize {
        self.n_points() * self.n_d()
    }

    pub fn gamma_index(&self, ring: usize, element: usize) -> usize {
        self.gamma_offset() + ring * self.elements_per_ring + element
    }

    pub fn u_offset(&self) -> usize {
        self.gamma_offset() + self.n_elements()
    }

    pub fn u_index(&self, ring: usize, point: usize) -> usize {
        self.u_offset() + (ring * self.points_per_ring() + point) * self.n_d()
    }

    pub fn m_offset(&self) -> usize {
        self.u_offset() + self.n_points() * self.n_d()
    }

    pub fn m_index(&self, turbine: usize, control: usize) -> usize {
        self.m_offset() + turbine * CONTROLS_PER_TURBINE + control
    }
}

/// Upstream shedding turbine at the origin, virtual turbine `spacing` downstream.
pub fn two_turbines(spacing: f64) -> Vec<Turbine> {
    vec![
        Turbine {
            position: [0.0; 3],
            is_virtual: false,
        },
        Turbine {
            position: [spacing, 0.0, 0.0],
            is_virtual: true,
        },
    ]
}
