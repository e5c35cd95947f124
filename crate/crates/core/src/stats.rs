//! Small descriptive statistics and least-squares fits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two samples).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Linear-interpolated quantile, `p in [0,1]`.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Ordinary least-squares line, usually through log-log data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Every response was exactly zero, so no line was fitted.
    pub exact_zero: bool,
}

impl ScalingFit {
    /// Least squares `y = a + b x`.
    pub fn linear(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::Dimension("regression inputs differ in length".into()));
        }
        if n < 2 {
            return Err(invalid("regression needs at least two points"));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(invalid("regression inputs must be finite"));
        }
        let (mx, my) = (mean(xs), mean(ys));
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(invalid("regression abscissae are all equal"));
        }
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
        let stderr = if n > 2 { (sse / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
        Ok(Self { slope, intercept, stderr, r_squared, n_points: n, exact_zero: false })
    }

    /// Fit `log y = a + b log x`. All-zero responses give the exact-zero fit.
    pub fn loglog(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if !ys.is_empty() && ys.iter().all(|&y| y == 0.0) {
            return Ok(Self { slope: 0.0, intercept: 0.0, stderr: 0.0, r_squared: 1.0, n_points: ys.len(), exact_zero: true });
        }
        if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
            return Err(invalid("log-log fit needs positive data"));
        }
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        Self::linear(&lx, &ly)
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        let f = ScalingFit::loglog(&xs, &ys).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn zero_responses() {
        let f = ScalingFit::loglog(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!(f.exact_zero);
        assert!(ScalingFit::loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }
}
