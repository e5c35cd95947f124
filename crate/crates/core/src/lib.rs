//! Numerical laboratory for SDEs driven by fractional Brownian motion with
//! irregular drift.
//!
//! * [`fbm`]: exact grid sampling, conditioning and branching of fBm.
//! * [`drift`]: drift fields with regularity metadata, controls, heat smoothing.
//! * [`young`]: sewing, p-variation, Young integrals and Young equations.
//! * [`sde`]: Euler solvers, mollified families, flows, Jacobians, Malliavin derivatives.
//! * [`estimators`]: Monte Carlo estimators of scaling exponents.
//! * [`mkv`]: McKean-Vlasov equations by Picard iteration and particles.
//! * [`transport`]: transport and continuity equations by characteristics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drift;
pub mod error;
pub mod estimators;
pub mod fbm;
pub mod mkv;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod transport;
pub mod young;

pub use error::{Error, Result};
