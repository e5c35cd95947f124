use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::{classify_regime, DriftField};
use crate::error::{invalid, Result};
use crate::fbm::TimeGrid;
use crate::rng::derive_seed;
use crate::sde::{integrate_phi, Scheme};
use crate::stats::{mean, ScalingFit};
use crate::young::DiscretePath;

#[derive(Debug, Clone)]
pub struct ConditionalRegularityConfig {
    pub drift: DriftField,
    pub hurst: f64,
    pub m: f64,
    pub n_steps: usize,
    /// Grid index pairs `(s, t)`, `s < t`.
    pub pairs: Vec<(usize, usize)>,
    pub pasts: usize,
    pub branches: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairEstimate {
    pub s: usize,
    pub t: usize,
    pub length: f64,
    /// Maximum over pasts of the branch `L^m` deviation of `phi_t`.
    pub estimate: f64,
    /// Standard error of the estimate at the maximizing past.
    pub stderr: f64,
    pub argmax_past: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalIncrementStats {
    pub m: f64,
    pub pasts: usize,
    pub branches: usize,
    pub pairs: Vec<PairEstimate>,
    /// Some branch standard error exceeds 20% of its estimate.
    pub budget_too_small: bool,
    pub fit: Option<ScalingFit>,
    /// `1/q' + alpha H` for the declared drift metadata.
    pub predicted_slope: f64,
}

/// Branch `L^m` deviation of `values` about their mean, with a delta-method
/// standard error.
fn branch_norm(values: &[Vec<f64>], m: f64) -> (f64, f64) {
    let d = values[0].len();
    let centre: Vec<f64> = (0..d).map(|c| values.iter().map(|v| v[c]).sum::<f64>() / values.len() as f64).collect();
    let powers: Vec<f64> = values
        .iter()
        .map(|v| v.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt().powf(m))
        .collect();
    let mm = mean(&powers);
    let est = mm.powf(1.0 / m);
    if est == 0.0 {
        return (0.0, 0.0);
    }
    let se = crate::stats::std_error(&powers) / (m * est.powf(m - 1.0));
    (est, se)
}

/// Nested Monte Carlo for `||phi_t - E_s phi_t||_{L^m | F_s}`: sample pasts,
/// branch conditional futures at `s`, solve along each, and take the maximum
/// over pasts of the branch deviation. The branch mean stands in for the
/// conditional expectation.
pub fn conditional_regularity_exponent(cfg: &ConditionalRegularityConfig) -> Result<ConditionalIncrementStats> {
    let report = classify_regime(cfg.hurst, cfg.drift.q(), cfg.drift.alpha())?;
    report.require_a_or_b()?;
    if cfg.pairs.is_empty() || cfg.pasts == 0 || cfg.branches < 2 {
        return Err(invalid("need pairs, at least one past and two branches"));
    }
    if !(cfg.m >= 1.0) {
        return Err(invalid(format!("moment order must be >= 1, got {}", cfg.m)));
    }
    if cfg.pairs.iter().any(|&(s, t)| s >= t || t > cfg.n_steps) {
        return Err(invalid("pairs must satisfy s < t <= n"));
    }
    let grid = TimeGrid::unit(cfg.n_steps)?;
    let factor = crate::fbm::cached_factor(cfg.hurst, grid)?;
    let d = cfg.drift.dim();
    let mut by_s: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(s, t) in &cfg.pairs {
        by_s.entry(s).or_default().push(t);
    }

    // per past: (s, t) -> (estimate, stderr)
    let per_past: Vec<BTreeMap<(usize, usize), (f64, f64)>> = (0..cfg.pasts)
        .into_par_iter()
        .map(|p| {
            let past = factor.sample(d, derive_seed(cfg.seed, "past", p as u64))?;
            let path = DiscretePath::from_fbm(&past);
            let phi_past = integrate_phi(&cfg.drift, cfg.scheme, &path, 0, &vec![0.0; d])?;
            let mut out = BTreeMap::new();
            for (&s, ts) in &by_s {
                let branch_seed = derive_seed(cfg.seed, "branches", (p as u64) << 32 | s as u64);
                let finals: Vec<Vec<Vec<f64>>> = (0..cfg.branches)
                    .into_par_iter()
                    .map(|b| {
                        let fut = DiscretePath::from_fbm(&past.branch_one(s, branch_seed, b as u64));
                        let phi = integrate_phi(&cfg.drift, cfg.scheme, &fut, s, &phi_past[s])?;
                        Ok(ts.iter().map(|&t| phi[t - s].clone()).collect())
                    })
                    .collect::<Result<_>>()?;
                for (k, &t) in ts.iter().enumerate() {
                    let vals: Vec<Vec<f64>> = finals.iter().map(|f| f[k].clone()).collect();
                    out.insert((s, t), branch_norm(&vals, cfg.m));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<PairEstimate> = cfg
        .pairs
        .iter()
        .map(|&(s, t)| {
            let (argmax_past, &(estimate, stderr)) = per_past
                .iter()
                .map(|m| &m[&(s, t)])
                .enumerate()
                .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .expect("at least one past");
            PairEstimate { s, t, length: grid.node(t) - grid.node(s), estimate, stderr, argmax_past }
        })
        .collect();
    let budget_too_small = pairs.iter().any(|p| p.estimate > 0.0 && p.stderr > 0.2 * p.estimate);
    let lengths: Vec<f64> = pairs.iter().map(|p| p.length).collect();
    let ests: Vec<f64> = pairs.iter().map(|p| p.estimate).collect();
    let fit = if pairs.len() >= 2 { ScalingFit::loglog(&lengths, &ests).ok() } else { None };
    let predicted_slope = 1.0 / report.q_conjugate + cfg.drift.alpha() * cfg.hurst;
    Ok(ConditionalIncrementStats {
        m: cfg.m,
        pasts: cfg.pasts,
        branches: cfg.branches,
        pairs,
        budget_too_small,
        fit,
        predicted_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{TimeProfile, TrigSeries};
    use std::sync::Arc;

    fn cfg(drift: DriftField) -> ConditionalRegularityConfig {
        ConditionalRegularityConfig {
            drift,
            hurst: 1.0 / 3.0,
            m: 2.0,
            n_steps: 128,
            pairs: vec![(32, 36), (32, 40), (32, 48), (32, 64)],
            pasts: 4,
            branches: 32,
            seed: 11,
            scheme: Scheme::Euler,
        }
    }

    #[test]
    fn zero_drift_gives_exact_zeros() {
        let st = conditional_regularity_exponent(&cfg(DriftField::zero(1).with_metadata(0.5, 2.0).unwrap())).unwrap();
        assert!(st.pairs.iter().all(|p| p.estimate == 0.0));
        assert!(st.fit.unwrap().exact_zero);
        assert!(!st.budget_too_small);
    }

    #[test]
    fn crude_bound_holds() {
        // |phi_t - phi'_t| <= 2 int_s^t ||b_r||_inf dr, and Hoelder in time
        let q = 2.0;
        let profile = TimeProfile::Power { scale: 1.0, origin: 0.0, exponent: 0.3 };
        let drift = DriftField::new(Arc::new(TrigSeries::sine(1.0, 2.0)), profile.clone(), 0.5, q).unwrap();
        let st = conditional_regularity_exponent(&cfg(drift)).unwrap();
        for p in &st.pairs {
            let (s, t) = (p.s as f64 / 128.0, p.t as f64 / 128.0);
            let w = profile.power_integral(q, s, t);
            let bound = 2.0 * w.powf(1.0 / q) * (t - s).powf(1.0 - 1.0 / q);
            assert!(p.estimate > 0.0 && p.estimate <= bound, "{} > {bound}", p.estimate);
        }
    }

    #[test]
    fn out_of_regime_is_rejected() {
        let bad = DriftField::zero(1).with_metadata(-0.9, 2.0).unwrap();
        assert!(matches!(conditional_regularity_exponent(&cfg(bad)), Err(crate::Error::Regime(_))));
    }
}
