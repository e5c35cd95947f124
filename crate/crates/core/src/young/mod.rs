//! Deterministic rough calculus: p-variation, dyadic sewing, Young
//! integrals and affine / nonlinear Young equations.

mod equations;
mod path;
mod pvar;
mod sewing;

pub use equations::{
    linear_flow_matrix, reverse_linear_flow, solve_affine_young, solve_nonlinear_yde, remainder_profile,
    AffineSolution, TwoParamField, YoungBound,
};
pub use path::DiscretePath;
pub use pvar::{p_variation, p_variation_range, PVarMethod, PVarResult, EXACT_PVAR_LIMIT};
pub use sewing::{sew, young_integral, Germ, SewOptions, SewingDiagnostics};
