use regnoise::estimators::{branching_statistics, counterexample_branching, resolved_xi_band, rho_irregularity, BranchingConfig, RhoOptions};
use regnoise::drift::classify_regime;
use regnoise::fbm::{cached_factor, check_hurst, TimeGrid};
use regnoise::rng::derive_seed;
use regnoise::stats::ScalingFit;
use regnoise::young::DiscretePath;

use super::Job;
use crate::config::{ExperimentConfig, Params};
use crate::error::{config_err, LabResult};
use crate::outcome::Outcome;

pub fn rho_irregularity_experiment(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["hurst", "n_steps", "paths"])?;
    p.no_field()?;
    let hursts = p.numbers("hurst");
    for &h in &hursts {
        check_hurst(h)?;
        if h >= 1.0 {
            return Err(config_err(format!("rho-irregularity needs H < 1, got {h}")));
        }
    }
    let n = p.positive("n_steps")?;
    let paths = p.positive("paths")?;
    let seed = p.seed();
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let mut out = Outcome::default();
        for (k, &h) in hursts.iter().enumerate() {
            let factor = cached_factor(h, grid)?;
            let sample: Vec<DiscretePath> = (0..paths)
                .map(|j| Ok(DiscretePath::from_fbm(&factor.sample(1, derive_seed(seed, "rho", (k * paths + j) as u64))?)))
                .collect::<regnoise::Result<_>>()?;
            let (lo, hi) = resolved_xi_band(h, n);
            let r = rho_irregularity(&sample, &RhoOptions { xi_min: lo, xi_max: hi, ..RhoOptions::default() })?;
            let target = 1.0 / (2.0 * h);
            let key = format!("H={h}");
            out.stat(format!("{key}/median_rho"), r.median_rho);
            out.stat(format!("{key}/target"), target);
            out.stat(format!("{key}/deviation"), r.median_rho - target);
            out.stat(format!("{key}/median_gamma"), r.median_gamma);
            out.stat(format!("{key}/max_bound_ratio"), r.max_bound_ratio);
            // median envelope per frequency bin
            for (b, xi) in r.xi_bins.iter().enumerate() {
                let col: Vec<f64> = r.envelopes.iter().map(|e| e[b]).collect();
                out.point(&key, *xi, regnoise::stats::median(&col), 0.0);
            }
            out.json_artifact(format!("rho-H{h}.json"), &r.per_path);
        }
        Ok(out)
    }))
}

pub fn counterexample(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(
        cfg,
        &["alpha", "control_alpha", "delta", "hurst", "min_horizon_steps", "n_steps", "paths", "q_tilde", "x_seq"],
    )?;
    p.no_field()?;
    let base = BranchingConfig {
        hurst: p.hurst()?,
        q_tilde: p.number("q_tilde"),
        alpha: p.number("alpha"),
        delta: p.number("delta"),
        n_steps: p.positive("n_steps")?,
        x_seq: p.numbers("x_seq"),
        paths: p.positive("paths")?,
        seed: p.seed(),
        min_horizon_steps: p.positive("min_horizon_steps")?,
    };
    if base.x_seq.len() < 2 || base.x_seq.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(config_err("x_seq must be positive and strictly decreasing"));
    }
    let control = BranchingConfig { alpha: p.number("control_alpha"), ..base.clone() };
    // the control set must sit on the other side of the threshold
    classify_regime(control.hurst, control.q_tilde, control.alpha)?.require_subcritical()?;
    base.check_supercritical()?;
    Ok(Box::new(move || {
        let r = counterexample_branching(&base)?;
        let c = branching_statistics(&control)?;
        let mut out = Outcome::default();
        for f in &r.families {
            out.point("supercritical gap", f.x, f.mean_gap, f.gap_stderr);
        }
        for f in &c.families {
            out.point("control gap", f.x, f.mean_gap, f.gap_stderr);
        }
        out.stat("gamma", r.gamma);
        out.stat("best_horizon", r.best_horizon);
        out.stat("min_upper_fraction", r.min_upper_fraction);
        out.stat("min_mirrored_fraction", r.min_mirrored_fraction);
        out.stat("min_lower_fraction", r.min_lower_fraction);
        out.stat("mirror_error", r.mirror_error);
        let gaps: Vec<f64> = c.families.iter().map(|f| f.mean_gap).collect();
        let xs: Vec<f64> = c.families.iter().map(|f| f.x).collect();
        out.stat("control/first_gap", gaps[0]);
        out.stat("control/last_gap", *gaps.last().unwrap());
        out.flag("control/gap_decreasing", gaps.windows(2).all(|w| w[1] < w[0]));
        out.stat("control/gap_slope", ScalingFit::loglog(&xs, &gaps)?.slope);
        out.stat("supercritical/last_gap", r.families.last().map_or(0.0, |f| f.mean_gap));
        out.json_artifact("supercritical.json", &r);
        out.json_artifact("control.json", &c);
        Ok(out)
    }))
}
