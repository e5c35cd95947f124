use regnoise::fbm::{cached_factor, check_hurst, fbm_covariance, FbmFactor, TimeGrid};
use regnoise::rng::derive_seed;

use super::Job;
use crate::config::{ExperimentConfig, Params};
use crate::error::{config_err, LabResult};
use crate::outcome::Outcome;

/// Conditional variance of `B_t` given `B_1..B_s` over `|t-s|^{2H}`, on
/// pairs inside the grid.
pub fn lnd_constant(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["hurst", "n_steps"])?;
    p.no_field()?;
    let hursts = p.numbers("hurst");
    let n = p.positive("n_steps")?;
    for &h in &hursts {
        check_hurst(h)?;
        if h >= 1.0 {
            return Err(config_err(format!("local nondeterminism needs H < 1, got {h}")));
        }
    }
    if n < 16 {
        return Err(config_err("lnd-constant needs n_steps >= 16"));
    }
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let mut out = Outcome::default();
        let mut rows = String::from("hurst,s,t,ratio\n");
        for &h in &hursts {
            let f = FbmFactor::new(h, grid)?;
            let mut ratios = Vec::new();
            for s in [n / 4, n / 2, 3 * n / 4] {
                let mut k = 1;
                while k <= n / 4 {
                    let r = f.conditional_variance(s, s + k)? / (k as f64 * grid.dt()).powf(2.0 * h);
                    rows.push_str(&format!("{h},{s},{},{r:e}\n", s + k));
                    out.point(format!("H={h} s={s}"), k as f64 * grid.dt(), r, 0.0);
                    ratios.push(r);
                    k *= 2;
                }
            }
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(0.0, f64::max);
            out.stat(format!("H={h}/min_ratio"), lo);
            out.stat(format!("H={h}/max_ratio"), hi);
            out.stat(format!("H={h}/spread"), (hi - lo) / lo);
        }
        out.artifact("ratios.csv", rows.into_bytes());
        Ok(out)
    }))
}

/// Empirical second moments of sampled paths against the closed form.
pub fn fbm_law(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["hurst", "n_steps", "paths"])?;
    p.no_field()?;
    let h = p.hurst()?;
    check_hurst(h)?;
    let n = p.positive("n_steps")?;
    let paths = p.positive("paths")?;
    if paths < 2 {
        return Err(config_err("fbm-law needs at least two paths"));
    }
    let seed = p.seed();
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let factor = cached_factor(h, grid)?;
        let samples: Vec<Vec<f64>> = (0..paths)
            .map(|k| Ok(factor.sample(1, derive_seed(seed, "law", k as u64))?.component(0).to_vec()))
            .collect::<regnoise::Result<_>>()?;
        let mut out = Outcome::default();
        let mut rows = String::from("i,j,empirical,exact,stderr\n");
        let (mut max_z, mut max_err, mut exceed, mut entries) = (0.0_f64, 0.0_f64, 0usize, 0usize);
        let pf = paths as f64;
        for i in 1..=n {
            for j in i..=n {
                let prods: Vec<f64> = samples.iter().map(|b| b[i] * b[j]).collect();
                let mean = regnoise::stats::mean(&prods);
                let se = regnoise::stats::std_error(&prods);
                let exact = fbm_covariance(h, grid.node(i), grid.node(j))?;
                let z = (mean - exact).abs() / se;
                max_z = max_z.max(z);
                max_err = max_err.max((mean - exact).abs());
                exceed += usize::from(z > 3.0);
                entries += 1;
                rows.push_str(&format!("{i},{j},{mean:e},{exact:e},{se:e}\n"));
                if i == j {
                    out.point("empirical variance", grid.node(i), mean, se);
                    out.point("exact variance", grid.node(i), exact, 0.0);
                }
            }
        }
        out.stat("entries", entries as f64);
        out.stat("paths", pf);
        out.stat("max_z", max_z);
        out.stat("max_abs_error", max_err);
        out.stat("entries_beyond_3se", exceed as f64);
        out.artifact("covariance.csv", rows.into_bytes());
        Ok(out)
    }))
}
