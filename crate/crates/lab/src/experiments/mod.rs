//! One module per family of experiments. Each entry point parses and
//! validates its parameters (including the regime) and returns the deferred
//! computation, so `validate` never consumes budget.

mod estimators;
mod fbm;
mod mkv_transport;
mod sde;
mod young;

use crate::error::LabResult;
use crate::outcome::Outcome;

pub type Job = Box<dyn FnOnce() -> LabResult<Outcome>>;

pub(crate) use estimators::{counterexample, rho_irregularity_experiment};
pub(crate) use fbm::{fbm_law, lnd_constant};
pub(crate) use mkv_transport::{mkv_contraction, transport_continuity};
pub(crate) use sde::{conditional_regularity, malliavin_direction, mollified_cauchy, semiflow_jacobian, stability};
pub use sde::FLOW_TOLERANCE;
pub(crate) use young::{affine_young_bound, pvar_oracle, sewing_convergence};
pub use young::enumerate_p_variation;
