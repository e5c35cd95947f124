//! Monte Carlo estimators of scaling exponents and bounds.

mod conditional;
mod counterexample;
mod moments;
mod rho;
mod stability;

pub use crate::stats::ScalingFit;
pub use conditional::{conditional_regularity_exponent, ConditionalIncrementStats, ConditionalRegularityConfig, PairEstimate};
pub use counterexample::{
    branching_statistics, counterexample_branching, BranchingConfig, CounterexampleReport, FamilyStats,
};
pub use moments::{moment_estimator, MomentEstimate};
pub use rho::{oscillatory_integral, resolved_xi_band, rho_irregularity, Envelope, PathRho, RhoIrregularityReport, RhoOptions};
pub use stability::{stability_rate, StabilityCase, StabilityReport};
