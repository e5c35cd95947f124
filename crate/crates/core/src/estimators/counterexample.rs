use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::{classify_regime, conjugate, DriftField, Regime, SignPower, TimeProfile};
use crate::error::{invalid, Error, Result};
use crate::fbm::{cached_factor, TimeGrid};
use crate::rng::derive_seed;
use crate::sde::{integrate_phi, Scheme};
use crate::stats::{mean, std_error};
use crate::young::DiscretePath;

#[derive(Debug, Clone)]
pub struct BranchingConfig {
    pub hurst: f64,
    pub q_tilde: f64,
    pub alpha: f64,
    pub delta: f64,
    pub n_steps: usize,
    /// Starting points `x_n`, decreasing to 0.
    pub x_seq: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    /// Shortest scanned horizon, in steps; horizons are doubled up to `n`.
    pub min_horizon_steps: usize,
}

/// Drift `t^(-1/q~) sign(x) |x|^alpha`. The time factor is only weakly
/// `L^q~`, so the declared integrability is `q~ - 0.01`.
pub fn counterexample_drift(alpha: f64, q_tilde: f64) -> Result<DriftField> {
    DriftField::new(
        Arc::new(SignPower { alpha, cap: 1e6, dim: 1 }),
        TimeProfile::Power { scale: 1.0, origin: 0.0, exponent: 1.0 / q_tilde },
        alpha,
        q_tilde - 0.01,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyStats {
    pub x: f64,
    /// Fraction of paths with `X_t >= delta t^gamma` on `(0, rho]`, per horizon.
    pub upper_fraction: Vec<f64>,
    /// Same for `X^{-x}` driven by `-B`, with `X <= -delta t^gamma`.
    pub mirrored_fraction: Vec<f64>,
    /// Same for `X^{-x}` driven by `B` itself.
    pub lower_fraction: Vec<f64>,
    /// `E sup_t |X^x - X^{-x}|` under the same noise.
    pub mean_gap: f64,
    pub gap_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub gamma: f64,
    pub horizons: Vec<f64>,
    pub families: Vec<FamilyStats>,
    /// Largest horizon where every family keeps the upper envelope with
    /// frequency >= 3/4, or the horizon with the best worst case if none does.
    pub best_horizon: f64,
    pub min_upper_fraction: f64,
    pub min_mirrored_fraction: f64,
    pub min_lower_fraction: f64,
    /// `max |X^{-x}(-B) + X^x(B)|`; zero for an odd drift.
    pub mirror_error: f64,
}

fn gamma_of(cfg: &BranchingConfig) -> f64 {
    1.0 / (conjugate(cfg.q_tilde) * (1.0 - cfg.alpha))
}

impl BranchingConfig {
    /// Rejects parameter sets outside the supercritical construction.
    pub fn check_supercritical(&self) -> Result<()> {
        validate(self)
    }
}

fn validate(cfg: &BranchingConfig) -> Result<()> {
    let r = classify_regime(cfg.hurst, cfg.q_tilde, cfg.alpha)?;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Regime(format!("need 0 < alpha < 1, got alpha = {}", cfg.alpha)));
    }
    if r.regime != Regime::Supercritical {
        return Err(Error::Regime(format!(
            "counterexample needs alpha < 1 - 1/(H q~') = {:.4}, got alpha = {}",
            r.threshold, cfg.alpha
        )));
    }
    let g = gamma_of(cfg);
    if g >= cfg.hurst {
        return Err(Error::Regime(format!("need gamma = 1/(q~'(1-alpha)) = {g:.4} < H = {}", cfg.hurst)));
    }
    if cfg.delta.powf(cfg.alpha) / g <= 2.0 * cfg.delta {
        return Err(Error::Regime(format!("need delta^alpha / gamma > 2 delta, got delta = {}", cfg.delta)));
    }
    Ok(())
}

/// Per `x`: upper, mirrored and lower exit steps, sup-gap, mirror error.
type Record = (usize, usize, usize, f64, f64);

/// First step `i >= 1` with `sign * X_i < delta t_i^gamma`, or `n + 1`.
fn first_exit(x: &[f64], sign: f64, delta: f64, gamma: f64, dt: f64) -> usize {
    (1..x.len()).find(|&i| sign * x[i] < delta * (i as f64 * dt).powf(gamma)).unwrap_or(x.len())
}

/// Supercritical branching experiment: shared-noise solutions from
/// `x_n -> 0+` and from `-x_n`, their envelope-holding frequencies and gap.
pub fn counterexample_branching(cfg: &BranchingConfig) -> Result<CounterexampleReport> {
    validate(cfg)?;
    branching_statistics(cfg)
}

/// The same statistics without the supercritical check, for control runs.
pub fn branching_statistics(cfg: &BranchingConfig) -> Result<CounterexampleReport> {
    if cfg.x_seq.is_empty() || cfg.paths == 0 {
        return Err(invalid("need starting points and paths"));
    }
    if cfg.x_seq.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("starting points must be positive"));
    }
    if cfg.min_horizon_steps == 0 || cfg.min_horizon_steps > cfg.n_steps {
        return Err(invalid("minimum horizon must lie in 1..=n"));
    }
    let gamma = gamma_of(cfg);
    let drift = counterexample_drift(cfg.alpha, cfg.q_tilde)?;
    let grid = TimeGrid::unit(cfg.n_steps)?;
    let dt = grid.dt();
    let factor = cached_factor(cfg.hurst, grid)?;
    let mut horizon_steps = Vec::new();
    let mut h = cfg.min_horizon_steps;
    while h < cfg.n_steps {
        horizon_steps.push(h);
        h *= 2;
    }
    horizon_steps.push(cfg.n_steps);

    let solve_from = |noise: &DiscretePath, x0: f64| -> Result<Vec<f64>> {
        let phi = integrate_phi(&drift, Scheme::Euler, noise, 0, &[x0])?;
        Ok(phi.iter().zip(noise.values()).map(|(p, b)| p[0] + b[0]).collect())
    };
    let per_path: Vec<Vec<Record>> = (0..cfg.paths)
        .into_par_iter()
        .map(|k| {
            let b = factor.sample(1, derive_seed(cfg.seed, "path", k as u64))?;
            let noise = DiscretePath::from_fbm(&b);
            let neg = DiscretePath::from_fbm(&b.negated());
            cfg.x_seq
                .iter()
                .map(|&x| {
                    let up = solve_from(&noise, x)?;
                    let mirrored = solve_from(&neg, -x)?;
                    let low = solve_from(&noise, -x)?;
                    let gap = up.iter().zip(&low).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
                    let mirror = up.iter().zip(&mirrored).map(|(a, c)| (a + c).abs()).fold(0.0, f64::max);
                    Ok((
                        first_exit(&up, 1.0, cfg.delta, gamma, dt),
                        first_exit(&mirrored, -1.0, cfg.delta, gamma, dt),
                        first_exit(&low, -1.0, cfg.delta, gamma, dt),
                        gap,
                        mirror,
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let frac = |j: usize, pick: fn(&Record) -> usize| -> Vec<f64> {
        horizon_steps
            .iter()
            .map(|&h| per_path.iter().filter(|p| pick(&p[j]) > h).count() as f64 / cfg.paths as f64)
            .collect()
    };
    let families: Vec<FamilyStats> = cfg
        .x_seq
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let gaps: Vec<f64> = per_path.iter().map(|p| p[j].3).collect();
            FamilyStats {
                x,
                upper_fraction: frac(j, |p| p.0),
                mirrored_fraction: frac(j, |p| p.1),
                lower_fraction: frac(j, |p| p.2),
                mean_gap: mean(&gaps),
                gap_stderr: std_error(&gaps),
            }
        })
        .collect();
    let worst = |h: usize, f: fn(&FamilyStats) -> &Vec<f64>| families.iter().map(|s| f(s)[h]).fold(1.0, f64::min);
    let best = (0..horizon_steps.len())
        .rev()
        .find(|&h| worst(h, |s| &s.upper_fraction) >= 0.75)
        .unwrap_or_else(|| {
            (0..horizon_steps.len())
                .max_by(|&a, &c| worst(a, |s| &s.upper_fraction).total_cmp(&worst(c, |s| &s.upper_fraction)))
                .unwrap_or(0)
        });
    Ok(CounterexampleReport {
        gamma,
        horizons: horizon_steps.iter().map(|&h| h as f64 * dt).collect(),
        best_horizon: horizon_steps[best] as f64 * dt,
        min_upper_fraction: worst(best, |s| &s.upper_fraction),
        min_mirrored_fraction: worst(best, |s| &s.mirrored_fraction),
        min_lower_fraction: worst(best, |s| &s.lower_fraction),
        mirror_error: per_path.iter().flat_map(|p| p.iter().map(|e| e.4)).fold(0.0, f64::max),
        families,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn supercritical() -> BranchingConfig {
        BranchingConfig {
            hurst: 0.8,
            q_tilde: 4.0,
            alpha: 0.05,
            delta: 0.01,
            n_steps: 256,
            x_seq: vec![0.25, 0.0625, 0.015625],
            paths: 64,
            seed: 5,
            min_horizon_steps: 16,
        }
    }

    #[test]
    fn deterministic_ode_stays_above_envelope() {
        let cfg = supercritical();
        let g = gamma_of(&cfg);
        let drift = counterexample_drift(cfg.alpha, cfg.q_tilde).unwrap();
        let grid = TimeGrid::unit(1024).unwrap();
        let zero = DiscretePath::scalar(grid, vec![0.0; 1025]).unwrap();
        for x in [1e-2, 1e-4, 1e-8] {
            let phi = integrate_phi(&drift, Scheme::Euler, &zero, 0, &[x]).unwrap();
            let xs: Vec<f64> = phi.iter().map(|p| p[0]).collect();
            assert_eq!(first_exit(&xs, 1.0, cfg.delta, g, grid.dt()), 1025, "x = {x}");
        }
    }

    #[test]
    fn subcritical_parameters_are_rejected() {
        let cfg = BranchingConfig { hurst: 0.5, alpha: 0.5, ..supercritical() };
        let err = counterexample_branching(&cfg).unwrap_err();
        assert!(err.to_string().contains("alpha < 1 - 1/(H q~')"), "{err}");
    }

    #[test]
    fn mirror_symmetry_is_exact() {
        let r = counterexample_branching(&supercritical()).unwrap();
        assert_eq!(r.mirror_error, 0.0);
        for f in &r.families {
            assert_eq!(f.upper_fraction, f.mirrored_fraction);
        }
    }
}
