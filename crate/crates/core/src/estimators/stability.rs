use rayon::prelude::*;
use serde::Serialize;

use crate::drift::{classify_regime, DriftField};
use crate::error::{invalid, Result};
use crate::sde::{solve, Scheme, SdeProblem};
use crate::stats::{mean, std_error, ScalingFit};
use crate::young::DiscretePath;

/// Second solution of a shared-noise pair and its distance from the reference data.
#[derive(Debug, Clone)]
pub struct StabilityCase {
    pub drift: DriftField,
    pub x0: Vec<f64>,
    /// Size of the perturbation, e.g. `|x0 - x0'|` or a drift distance.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub distances: Vec<f64>,
    /// `E sup_t |X^1 - X^2|` per case.
    pub mean_sup: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: Option<ScalingFit>,
    pub replicates: usize,
}

/// Shared-noise Monte Carlo of `E sup_t |X^1_t - X^2_t|` for each case,
/// regressed against the case distance in log-log coordinates.
pub fn stability_rate(
    reference: &DriftField,
    x0: &[f64],
    cases: &[StabilityCase],
    noises: &[DiscretePath],
    hurst: f64,
    scheme: Scheme,
) -> Result<StabilityReport> {
    if noises.is_empty() || cases.is_empty() {
        return Err(invalid("need noises and perturbation cases"));
    }
    for b in std::iter::once(reference).chain(cases.iter().map(|c| &c.drift)) {
        classify_regime(hurst, b.q(), b.alpha())?.require_subcritical()?;
    }
    let gaps: Vec<Vec<f64>> = noises
        .par_iter()
        .map(|noise| {
            let base = solve(&SdeProblem::from_noise_path(reference.clone(), noise.clone(), hurst, x0.to_vec())?, scheme)?;
            cases
                .iter()
                .map(|c| {
                    let p = SdeProblem::from_noise_path(c.drift.clone(), noise.clone(), hurst, c.x0.clone())?;
                    Ok(solve(&p, scheme)?.x.sup_distance(&base.x))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let per_case: Vec<Vec<f64>> = (0..cases.len()).map(|k| gaps.iter().map(|g| g[k]).collect()).collect();
    let mean_sup: Vec<f64> = per_case.iter().map(|v| mean(v)).collect();
    let stderr = per_case.iter().map(|v| std_error(v)).collect();
    let distances: Vec<f64> = cases.iter().map(|c| c.distance).collect();
    let fit = if cases.len() >= 2 { ScalingFit::loglog(&distances, &mean_sup).ok() } else { None };
    Ok(StabilityReport { distances, mean_sup, stderr, fit, replicates: noises.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::TrigSeries;
    use crate::fbm::{sample_fbm, TimeGrid};
    use std::sync::Arc;

    fn noises(k: u64) -> Vec<DiscretePath> {
        (0..k).map(|s| DiscretePath::from_fbm(&sample_fbm(0.5, TimeGrid::unit(256).unwrap(), 1, s).unwrap())).collect()
    }

    #[test]
    fn identical_data_has_zero_distance() {
        let b = DriftField::autonomous(Arc::new(TrigSeries::sine(1.0, 1.0)), 1.0);
        let case = StabilityCase { drift: b.clone(), x0: vec![0.2], distance: 1.0 };
        let r = stability_rate(&b, &[0.2], &[case], &noises(4), 0.5, Scheme::Euler).unwrap();
        assert_eq!(r.mean_sup, vec![0.0]);
    }

    #[test]
    fn lipschitz_in_initial_condition() {
        let b = DriftField::autonomous(Arc::new(TrigSeries::sine(1.0, 1.0)), 1.0);
        let cases: Vec<StabilityCase> = (1..=7)
            .map(|k| {
                let d = 2f64.powi(-k);
                StabilityCase { drift: b.clone(), x0: vec![0.2 + d], distance: d }
            })
            .collect();
        let r = stability_rate(&b, &[0.2], &cases, &noises(16), 0.5, Scheme::Euler).unwrap();
        let fit = r.fit.unwrap();
        assert!((fit.slope - 1.0).abs() < 0.1 && fit.r_squared > 0.9, "{fit:?}");
    }
}
