use std::sync::Arc;

use regnoise::drift::{build_drift, classify_regime, Constant, DriftField, LacunaryDistribution, SignPower, SpatialField, SumField, TimeProfile};
use regnoise::estimators::{conditional_regularity_exponent, stability_rate, ConditionalRegularityConfig, StabilityCase};
use regnoise::fbm::{cached_factor, sample_fbm, TimeGrid};
use regnoise::rng::derive_seed;
use regnoise::sde::{compute_flow, jacobian_flow, malliavin_directional, solve_distributional, solve_euler, Scheme, SdeProblem};
use regnoise::stats::{mean, std_error};
use regnoise::young::DiscretePath;

use super::Job;
use crate::config::{ExperimentConfig, Params};
use crate::error::{config_err, LabResult};
use crate::outcome::{csv_bytes, Outcome};

fn sign_power(alpha: f64) -> LabResult<Arc<dyn SpatialField>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(config_err(format!("sign-power drift needs 0 < alpha <= 1, got {alpha}")));
    }
    Ok(Arc::new(SignPower { alpha, cap: 10.0, dim: 1 }))
}

/// Maximum over pasts of the conditional `L^m` deviation of the drift
/// integral, regressed against `t - s`.
pub fn conditional_regularity(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["alpha", "branches", "hurst", "m", "n_steps", "pasts", "q", "scheme"])?;
    p.no_field()?;
    let (h, q, alpha, m) = (p.hurst()?, p.number("q"), p.number("alpha"), p.number("m"));
    classify_regime(h, q, alpha)?.require_a_or_b()?;
    let n = p.positive("n_steps")?;
    if n % 128 != 0 {
        return Err(config_err("conditional-regularity needs n_steps divisible by 128"));
    }
    // a time singularity at the conditioning time s = n/4, just inside L^q
    let profile = TimeProfile::Power { scale: 0.05, origin: 0.25, exponent: 1.0 / (q + 0.05) };
    let drift = DriftField::new(sign_power(alpha)?, profile, alpha, q)?;
    let s = n / 4;
    let pairs = (0..6).map(|j| (s, s + ((n / 128) << j))).collect();
    let cfg = ConditionalRegularityConfig {
        drift,
        hurst: h,
        m,
        n_steps: n,
        pairs,
        pasts: p.positive("pasts")?,
        branches: p.positive("branches")?,
        seed: p.seed(),
        scheme: p.scheme()?,
    };
    Ok(Box::new(move || {
        let r = conditional_regularity_exponent(&cfg)?;
        let mut out = Outcome::default();
        for e in &r.pairs {
            out.point("conditional deviation", e.length, e.estimate, e.stderr);
        }
        let fit = r.fit.clone().ok_or_else(|| config_err("no positive estimates to fit"))?;
        out.stat("slope", fit.slope);
        out.stat("slope_stderr", fit.stderr);
        out.stat("r_squared", fit.r_squared);
        out.stat("predicted_slope", r.predicted_slope);
        out.flag("budget_too_small", r.budget_too_small);
        out.json_artifact("conditional.json", &r);
        Ok(out)
    }))
}

/// Shared-noise distances under perturbations of the initial value and of
/// the drift, each regressed in log-log coordinates.
pub fn stability(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["alpha", "hurst", "n_steps", "q", "replicates"])?;
    p.no_field()?;
    let (h, q, alpha) = (p.hurst()?, p.number("q"), p.number("alpha"));
    classify_regime(h, q, alpha)?.require_subcritical()?;
    let base = DriftField::autonomous(sign_power(alpha)?, alpha).with_metadata(alpha, q)?;
    let n = p.positive("n_steps")?;
    let reps = p.positive("replicates")?;
    let seed = p.seed();
    Ok(Box::new(move || {
        let factor = cached_factor(h, TimeGrid::unit(n)?)?;
        let noises: Vec<DiscretePath> = (0..reps)
            .map(|k| Ok(DiscretePath::from_fbm(&factor.sample(1, derive_seed(seed, "stability", k as u64))?)))
            .collect::<regnoise::Result<_>>()?;
        let x0 = 0.2;
        let sizes: Vec<f64> = (1..=6).map(|k| 4f64.powi(-k)).collect();
        let initial: Vec<StabilityCase> =
            sizes.iter().map(|&d| StabilityCase { drift: base.clone(), x0: vec![x0 + d], distance: d }).collect();
        let drift: Vec<StabilityCase> = sizes
            .iter()
            .map(|&d| {
                let shifted = SumField { a: Arc::clone(base.spatial()), b: Arc::new(Constant { value: vec![d] }) };
                Ok(StabilityCase { drift: DriftField::autonomous(Arc::new(shifted), alpha).with_metadata(alpha, q)?, x0: vec![x0], distance: d })
            })
            .collect::<regnoise::Result<_>>()?;
        let mut out = Outcome::default();
        for (label, cases) in [("initial", initial), ("drift", drift)] {
            let r = stability_rate(&base, &[x0], &cases, &noises, h, Scheme::Euler)?;
            for k in 0..r.distances.len() {
                out.point(label, r.distances[k], r.mean_sup[k], r.stderr[k]);
            }
            let fit = r.fit.clone().ok_or_else(|| config_err("stability regression needs two cases"))?;
            out.stat(format!("{label}/slope"), fit.slope);
            out.stat(format!("{label}/r_squared"), fit.r_squared);
            out.json_artifact(format!("{label}.json"), &r);
        }
        out.stat("replicates", reps as f64);
        Ok(out)
    }))
}

/// Solutions driven by heat smoothings of a lacunary distribution at
/// decreasing scales; consecutive sup-distances should shrink.
pub fn mollified_cauchy(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["alpha", "hurst", "levels", "n_steps", "q", "replicates"])?;
    p.no_field()?;
    let (h, q, alpha) = (p.hurst()?, p.number("q"), p.number("alpha"));
    classify_regime(h, q, alpha)?.require_condition_a()?;
    let levels = p.numbers("levels");
    if levels.len() < 3 {
        return Err(config_err("need at least three smoothing levels"));
    }
    let dist = LacunaryDistribution::new(alpha, 2.0, 0, 1.0, TimeProfile::Constant(1.0), q)?;
    let n = p.positive("n_steps")?;
    let reps = p.positive("replicates")?;
    let seed = p.seed();
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); levels.len() - 1];
        let mut monotone = 0usize;
        for k in 0..reps {
            let b = sample_fbm(h, grid, 1, derive_seed(seed, "mollified", k as u64))?;
            let problem = SdeProblem::new(DriftField::zero(1), &b, vec![0.0])?;
            let fam = solve_distributional(&dist, &levels, &problem, Scheme::Euler, 0.0)?;
            monotone += usize::from(!fam.non_cauchy);
            for (acc, d) in deltas.iter_mut().zip(&fam.cauchy_deltas) {
                acc.push(*d);
            }
        }
        let mut out = Outcome::default();
        let means: Vec<f64> = deltas.iter().map(|d| mean(d)).collect();
        for (k, d) in deltas.iter().enumerate() {
            out.point("mean sup distance", levels[k + 1], means[k], std_error(d));
            out.stat(format!("delta_{}", k + 1), means[k]);
        }
        out.flag("mean_monotone", means.windows(2).all(|w| w[1] <= 1.1 * w[0]));
        out.stat("replicate_monotone_fraction", monotone as f64 / reps as f64);
        out.stat("replicates", reps as f64);
        Ok(out)
    }))
}

fn smooth_drift(p: &Params, hurst: f64) -> LabResult<DriftField> {
    let drift = build_drift(p.field()?)?;
    if drift.dim() != 1 || drift.spatial().gradient(&[0.0]).is_none() {
        return Err(config_err(format!("field `{}` must be scalar with a gradient", drift.name())));
    }
    classify_regime(hurst, drift.q(), drift.alpha())?.require_subcritical()?;
    Ok(drift)
}

/// Rounding-level target for the composition residual of the fixed-step flow.
pub const FLOW_TOLERANCE: f64 = 1e-12;

pub fn semiflow_jacobian(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["hurst", "n_steps"])?;
    let h = p.hurst()?;
    let drift = smooth_drift(&p, h)?;
    let n = p.positive("n_steps")?;
    if n < 8 || n % 4 != 0 {
        return Err(config_err("semiflow-jacobian needs n_steps divisible by 4"));
    }
    let seed = p.seed();
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let noise = DiscretePath::from_fbm(&sample_fbm(h, grid, 1, derive_seed(seed, "flow", 0))?);
        let lattice: Vec<Vec<f64>> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&x| vec![x]).collect();
        let flow = compute_flow(&drift, &noise, &[0, n / 4, n / 2], &[n / 4, n / 2, 3 * n / 4, n], &lattice)?;
        let eps = 1e-4;
        let mut fd_err = 0.0_f64;
        let mut out = Outcome::default();
        for x in &lattice {
            let jp = jacobian_flow(&drift, &noise, 0, x)?;
            let up = jacobian_flow(&drift, &noise, 0, &[x[0] + eps])?;
            let down = jacobian_flow(&drift, &noise, 0, &[x[0] - eps])?;
            for i in 0..jp.x.len() {
                let fd = (up.x[i][0] - down.x[i][0]) / (2.0 * eps);
                let j = jp.jacobian[i][0];
                fd_err = fd_err.max((fd - j).abs() / j.abs());
                if i % (n / 64).max(1) == 0 {
                    out.point(format!("J(x0={})", x[0]), grid.node(i), j, 0.0);
                }
            }
        }
        out.stat("semiflow_residual", flow.semiflow_residual);
        out.stat("solver_tolerance", FLOW_TOLERANCE);
        out.stat("inverse_residual", flow.inverse_residual);
        out.stat("fd_relative_error", fd_err);
        out.artifact("flow.csv", csv_bytes(|w| flow.write_csv(w, grid.dt())));
        Ok(out)
    }))
}

/// Derivative along `h` of the solution map of the noise, against a
/// Richardson-extrapolated one-sided difference.
pub fn malliavin_direction(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["hurst", "n_steps", "x0"])?;
    let h = p.hurst()?;
    let drift = smooth_drift(&p, h)?;
    let n = p.positive("n_steps")?;
    let x0 = p.number("x0");
    let seed = p.seed();
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let b = DiscretePath::from_fbm(&sample_fbm(h, grid, 1, derive_seed(seed, "malliavin", 0))?);
        let problem = SdeProblem::from_noise_path(drift, b.clone(), h, vec![x0])?;
        let base = solve_euler(&problem)?.x;
        type Direction = (&'static str, fn(f64) -> f64);
        let directions: [Direction; 2] = [("h=t", |t| t), ("h=sin(2 pi t)", |t| (std::f64::consts::TAU * t).sin())];
        let mut out = Outcome::default();
        let mut worst = 0.0_f64;
        for (label, f) in directions {
            let dir = DiscretePath::from_fn(grid, |t| vec![f(t)])?;
            let d = malliavin_directional(&problem, &dir)?;
            let fd = |eps: f64| -> regnoise::Result<Vec<f64>> {
                let moved = b.values().iter().zip(dir.values()).map(|(u, v)| vec![u[0] + eps * v[0]]).collect();
                let x = solve_euler(&problem.with_noise(DiscretePath::new(grid, moved)?)?)?.x;
                Ok((0..=n).map(|i| (x.at(i)[0] - base.at(i)[0]) / eps).collect())
            };
            let (e1, e2) = (1e-3, 1e-4);
            let (f1, f2) = (fd(e1)?, fd(e2)?);
            let err = (0..=n).map(|i| ((e1 * f2[i] - e2 * f1[i]) / (e1 - e2) - d.at(i)[0]).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
            out.stat(format!("{label}/sup_error"), err);
            for i in (0..=n).step_by((n / 64).max(1)) {
                out.point(label, grid.node(i), d.at(i)[0], 0.0);
            }
        }
        out.stat("max_sup_error", worst);
        Ok(out)
    }))
}
