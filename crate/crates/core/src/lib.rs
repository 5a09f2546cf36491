//! Control-oriented free-vortex wake model for actuator-disc wind turbines.
//!
//! The crate provides the regularised vortex kernels ([`kernels`]), the
//! discrete-time wake model in 2D and 3D ([`model`]), discrete-adjoint
//! gradients of horizon objectives ([`adjoint`]), a receding-horizon economic
//! controller ([`control`]) and the experiment drivers used by the `fvw`
//! binary ([`experiments`]).

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod control;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod model;

pub use error::{FvwError, Result};
pub use kernels::Dimension;
pub use model::{InflowScenario, ModelConfig, StateVector, Turbine, WakeModel};
