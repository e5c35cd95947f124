use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::stats::{median, quantile, ScalingFit};
use crate::young::DiscretePath;

/// `int_s^t e^{i xi x_r} dr` for the piecewise-linear interpolation of the
/// scalar samples `x` (spacing `dt`), integrated exactly on each cell.
pub fn oscillatory_integral(x: &[f64], dt: f64, s: usize, t: usize, xi: f64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for i in s..t {
        let z = xi * (x[i + 1] - x[i]);
        // (e^{iz} - 1) / (iz)
        let (er, ei) = if z.abs() < 1e-6 { (1.0 - z * z / 6.0, z / 2.0) } else { (z.sin() / z, (1.0 - z.cos()) / z) };
        let (c, sn) = ((xi * x[i]).cos(), (xi * x[i]).sin());
        re += dt * (c * er - sn * ei);
        im += dt * (c * ei + sn * er);
    }
    (re, im)
}

/// How the frequencies inside one bin are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Envelope {
    /// Root mean square; unbiased for random paths when samples are few.
    Rms,
    /// Maximum; follows the upper envelope of oscillating deterministic decay.
    Max,
}

#[derive(Debug, Clone)]
pub struct RhoOptions {
    pub xi_min: f64,
    pub xi_max: f64,
    pub bins_per_octave: usize,
    /// Frequencies sampled inside each bin.
    pub samples_per_bin: usize,
    pub envelope: Envelope,
    /// Dyadic window levels used for the time exponent.
    pub gamma_levels: Vec<u32>,
    /// Unit directions for `d > 1` (ignored for scalar paths).
    pub directions: Vec<Vec<f64>>,
}

impl Default for RhoOptions {
    fn default() -> Self {
        Self {
            xi_min: 4.0,
            xi_max: 256.0,
            bins_per_octave: 4,
            // one frequency per bin: with several, low bins (correlated
            // samples) and high bins (independent ones) get different
            // log-biases and the fitted slope flattens
            samples_per_bin: 1,
            envelope: Envelope::Rms,
            gamma_levels: (1..=5).collect(),
            directions: Vec::new(),
        }
    }
}

/// Frequency band resolved by a grid of `n` steps for Hurst index `h`:
/// `[4, min(256, dt^-h)]`. Above `dt^-h` the phase moves by more than one
/// radian per step and the interpolated path, not the process, is measured.
pub fn resolved_xi_band(hurst: f64, n_steps: usize) -> (f64, f64) {
    let top = (n_steps as f64).powf(hurst).min(256.0);
    (4.0, top.max(8.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct PathRho {
    pub rho: f64,
    pub rho_r_squared: f64,
    pub gamma: f64,
    pub gamma_r_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoIrregularityReport {
    pub xi_bins: Vec<f64>,
    /// Per path, per bin: envelope of `|Phi_{0,T}(xi)|` over the bin and directions.
    pub envelopes: Vec<Vec<f64>>,
    pub per_path: Vec<PathRho>,
    pub median_rho: f64,
    /// 2.5% and 97.5% quantiles over paths.
    pub rho_interval: (f64, f64),
    pub median_gamma: f64,
    pub gamma_interval: (f64, f64),
    /// `max |Phi_{s,t}(xi)| / (t - s)` over everything evaluated; never above 1.
    pub max_bound_ratio: f64,
}

fn bins(opts: &RhoOptions) -> Vec<(f64, Vec<f64>)> {
    let k = opts.bins_per_octave as f64;
    let n_bins = ((opts.xi_max / opts.xi_min).log2() * k).floor() as usize;
    (0..n_bins)
        .map(|b| {
            let lo = opts.xi_min * 2f64.powf(b as f64 / k);
            let width = 2f64.powf(1.0 / k);
            let m = opts.samples_per_bin.max(1);
            let freqs = (0..m).map(|j| lo * width.powf((j as f64 + 0.5) / m as f64)).collect();
            (lo * width.sqrt(), freqs)
        })
        .collect()
}

fn projections(path: &DiscretePath, opts: &RhoOptions) -> Vec<Vec<f64>> {
    if path.dim() == 1 || opts.directions.is_empty() {
        return vec![path.component(0)];
    }
    opts.directions
        .iter()
        .map(|e| path.values().iter().map(|v| v.iter().zip(e).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

/// Fit `rho` from the decay of `|int_0^T e^{i xi X_r} dr|` in `xi` (bin
/// envelopes over the whole horizon) and `gamma` from the growth of
/// `max_windows sup_xi |xi|^rho |Phi_{s,t}(xi)|` over dyadic windows.
pub fn rho_irregularity(paths: &[DiscretePath], opts: &RhoOptions) -> Result<RhoIrregularityReport> {
    if paths.is_empty() {
        return Err(invalid("need at least one path"));
    }
    if !(opts.xi_min >= 1.0 && opts.xi_max > opts.xi_min) {
        return Err(invalid("frequencies must satisfy 1 <= xi_min < xi_max"));
    }
    let grid = paths[0].grid();
    if paths.iter().any(|p| p.grid() != grid) {
        return Err(invalid("paths must share a grid"));
    }
    let bins = bins(opts);
    if bins.len() < 3 {
        return Err(invalid("frequency band too narrow for a fit"));
    }
    let centres: Vec<f64> = bins.iter().map(|b| b.0).collect();
    let n = grid.n_steps();
    let dt = grid.dt();

    let results: Vec<(Vec<f64>, PathRho, f64)> = paths
        .par_iter()
        .map(|path| {
            let projs = projections(path, opts);
            let mut ratio = 0.0_f64;
            let mag = |x: &[f64], s: usize, t: usize, xi: f64, ratio: &mut f64| {
                let (re, im) = oscillatory_integral(x, dt, s, t, xi);
                let m = re.hypot(im);
                *ratio = ratio.max(m / ((t - s) as f64 * dt));
                m
            };
            let env: Vec<f64> = bins
                .iter()
                .map(|(_, fs)| {
                    let (mut acc, mut cnt, mut best) = (0.0_f64, 0.0, 0.0_f64);
                    for x in &projs {
                        for &xi in fs {
                            let m = mag(x, 0, n, xi, &mut ratio);
                            acc += m * m;
                            cnt += 1.0;
                            best = best.max(m);
                        }
                    }
                    match opts.envelope {
                        Envelope::Rms => (acc / cnt).sqrt(),
                        Envelope::Max => best,
                    }
                })
                .collect();
            let rfit = ScalingFit::loglog(&centres, &env)?;
            let rho = -rfit.slope;
            let (mut lens, mut sups) = (Vec::new(), Vec::new());
            for &level in opts.gamma_levels.iter().filter(|&&l| (1usize << l) <= n) {
                let w = n >> level;
                let mut worst = 0.0_f64;
                for k in 0..(1usize << level) {
                    for (_, fs) in &bins {
                        for x in &projs {
                            for &xi in fs {
                                worst = worst.max(xi.powf(rho) * mag(x, k * w, (k + 1) * w, xi, &mut ratio));
                            }
                        }
                    }
                }
                lens.push(w as f64 * dt);
                sups.push(worst);
            }
            let (gamma, gamma_r_squared) = match ScalingFit::loglog(&lens, &sups) {
                Ok(f) => (f.slope, f.r_squared),
                Err(_) => (f64::NAN, 0.0),
            };
            Ok((env, PathRho { rho, rho_r_squared: rfit.r_squared, gamma, gamma_r_squared }, ratio))
        })
        .collect::<Result<_>>()?;

    let rhos: Vec<f64> = results.iter().map(|r| r.1.rho).collect();
    let gammas: Vec<f64> = results.iter().map(|r| r.1.gamma).filter(|g| g.is_finite()).collect();
    let (median_gamma, gamma_interval) = if gammas.is_empty() {
        (f64::NAN, (f64::NAN, f64::NAN))
    } else {
        (median(&gammas), (quantile(&gammas, 0.025), quantile(&gammas, 0.975)))
    };
    Ok(RhoIrregularityReport {
        xi_bins: centres,
        median_rho: median(&rhos),
        rho_interval: (quantile(&rhos, 0.025), quantile(&rhos, 0.975)),
        median_gamma,
        gamma_interval,
        max_bound_ratio: results.iter().map(|r| r.2).fold(0.0, f64::max),
        envelopes: results.iter().map(|r| r.0.clone()).collect(),
        per_path: results.into_iter().map(|r| r.1).collect(),
    })
}
