use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::experiments::{self, Job};
use crate::run::determinism;

pub type Planner = fn(&ExperimentConfig) -> LabResult<Job>;

#[derive(Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    /// Acceptance criterion this experiment reproduces.
    pub criterion: u8,
    pub claim: &'static str,
    pub parameters: &'static [&'static str],
    /// Whether a `[field]` section is required.
    pub field: bool,
    /// Reference config shipped with the crate.
    #[serde(skip)]
    pub default_config: &'static str,
    #[serde(skip)]
    pub(crate) plan: Planner,
}

macro_rules! entry {
    ($name:literal, $crit:literal, $claim:literal, [$($p:literal),*], $field:literal, $plan:path) => {
        CatalogEntry {
            name: $name,
            criterion: $crit,
            claim: $claim,
            parameters: &[$($p),*],
            field: $field,
            default_config: include_str!(concat!("../configs/", $name, ".toml")),
            plan: $plan,
        }
    };
}

/// All experiments, ordered by criterion.
pub fn list_experiments() -> Vec<CatalogEntry> {
    vec![
        entry!("lnd-constant", 1, "conditional variance of fBm given its past is comparable to |t-s|^{2H}, with constant 1 at H = 1/2",
            ["hurst", "n_steps"], false, experiments::lnd_constant),
        entry!("fbm-law", 2, "sampled paths have the fBm covariance", ["hurst", "n_steps", "paths"], false, experiments::fbm_law),
        entry!("sewing-convergence", 3, "dyadic Riemann sums of a coherent germ converge geometrically to the sewn integral",
            ["refinements"], false, experiments::sewing_convergence),
        entry!("pvar-oracle", 4, "the dynamic program computes the exact p-variation", ["cases", "points"], false, experiments::pvar_oracle),
        entry!("affine-young-bound", 5, "affine Young equations obey an exponential a priori bound in [[A]]_p^p",
            ["cases", "hurst", "n_steps", "p"], false, experiments::affine_young_bound),
        entry!("conditional-regularity", 6, "conditional L^m increments of the drift integral scale like |t-s|^{1/q' + alpha H}",
            ["alpha", "branches", "hurst", "m", "n_steps", "pasts", "q", "scheme"], false, experiments::conditional_regularity),
        entry!("stability-rate", 7, "solutions are Lipschitz in the initial value and in the drift",
            ["alpha", "hurst", "n_steps", "q", "replicates"], false, experiments::stability),
        entry!("mollified-cauchy", 8, "solutions for smoothed distributional drifts form a Cauchy family",
            ["alpha", "hurst", "levels", "n_steps", "q", "replicates"], false, experiments::mollified_cauchy),
        entry!("semiflow-jacobian", 9, "the solution map is a semiflow whose Jacobian solves the variational equation",
            ["hurst", "n_steps"], true, experiments::semiflow_jacobian),
        entry!("malliavin-direction", 10, "the directional derivative in the noise solves the affine variational equation",
            ["hurst", "n_steps", "x0"], true, experiments::malliavin_direction),
        entry!("rho-irregularity", 11, "fBm paths are rho-irregular for rho close to 1/(2H)",
            ["hurst", "n_steps", "paths"], false, experiments::rho_irregularity_experiment),
        entry!("counterexample-branching", 12, "supercritical drifts split solutions from 0 into an upper and a lower branch",
            ["alpha", "control_alpha", "delta", "hurst", "min_horizon_steps", "n_steps", "paths", "q_tilde", "x_seq"],
            false, experiments::counterexample),
        entry!("mkv-contraction", 13, "the Picard map on laws of a McKean-Vlasov equation is a contraction",
            ["hurst", "iterations", "n_steps", "particles"], true, experiments::mkv_contraction),
        entry!("transport-continuity", 14, "characteristic solutions conserve mass and satisfy transport/continuity duality",
            ["half_width", "hurst", "lattice_points", "n_steps", "refinements"], true, experiments::transport_continuity),
        entry!("determinism", 15, "every experiment reproduces its digest under re-run", ["experiments"], false, determinism),
    ]
}

pub fn find(name: &str) -> LabResult<CatalogEntry> {
    list_experiments().into_iter().find(|e| e.name == name).ok_or_else(|| LabError::UnknownExperiment(name.to_string()))
}

/// Parsed reference config of `name`.
pub fn default_config(name: &str) -> LabResult<ExperimentConfig> {
    ExperimentConfig::parse(find(name)?.default_config)
}
