use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;
use crate::stats::quantile;

/// Empirical `L^m` norm with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub m: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    pub bootstrap_reps: usize,
}

impl MomentEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

fn lm_norm(xs: impl Iterator<Item = f64>, m: f64, n: usize) -> f64 {
    (xs.map(|x| x.abs().powf(m)).sum::<f64>() / n as f64).powf(1.0 / m)
}

/// `(mean |x|^m)^(1/m)` with a 95% percentile bootstrap interval.
pub fn moment_estimator(samples: &[f64], m: f64, bootstrap_reps: usize, seed: u64) -> Result<MomentEstimate> {
    if samples.is_empty() {
        return Err(invalid("moment estimator needs samples"));
    }
    if !(m >= 1.0 && m.is_finite()) {
        return Err(invalid(format!("moment order must be in [1, inf), got {m}")));
    }
    let n = samples.len();
    let value = lm_norm(samples.iter().copied(), m, n);
    if bootstrap_reps == 0 {
        return Ok(MomentEstimate { m, value, ci_low: value, ci_high: value, samples: n, bootstrap_reps });
    }
    let mut rng = rng::stream(seed, "bootstrap", 0);
    let reps: Vec<f64> = (0..bootstrap_reps)
        .map(|_| lm_norm((0..n).map(|_| samples[rng.random_range(0..n)]), m, n))
        .collect();
    Ok(MomentEstimate {
        m,
        value,
        ci_low: quantile(&reps, 0.025).min(value),
        ci_high: quantile(&reps, 0.975).max(value),
        samples: n,
        bootstrap_reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_are_exact() {
        let e = moment_estimator(&[-1.5; 40], 3.0, 200, 1).unwrap();
        assert!((e.value - 1.5).abs() < 1e-15);
        assert!((e.ci_high - e.ci_low).abs() < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        let z = rng::normals(&mut rng::stream(3, "t", 0), 20_000);
        let two = moment_estimator(&z, 2.0, 400, 2).unwrap();
        assert!(two.contains(1.0), "{two:?}");
        let one = moment_estimator(&z, 1.0, 400, 2).unwrap();
        assert!(one.contains((2.0 / std::f64::consts::PI).sqrt()), "{one:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(moment_estimator(&[], 2.0, 10, 0).is_err());
        assert!(moment_estimator(&[1.0], 0.5, 10, 0).is_err());
    }
}
