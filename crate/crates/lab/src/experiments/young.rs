use rand::Rng;
use regnoise::fbm::{cached_factor, check_hurst, TimeGrid};
use regnoise::rng::{derive_seed, stream};
use regnoise::stats::ScalingFit;
use regnoise::young::{p_variation, sew, solve_affine_young, DiscretePath, Germ, PVarMethod, SewOptions};

use super::Job;
use crate::config::{ExperimentConfig, Params};
use crate::error::{config_err, LabResult};
use crate::outcome::Outcome;

/// `f(s) (g(t) - g(s))` for smooth scalar `f`, `g`.
struct ProductGerm {
    f: fn(f64) -> f64,
    g: fn(f64) -> f64,
}

impl Germ for ProductGerm {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
        out[0] = (self.f)(s) * ((self.g)(t) - (self.g)(s));
    }
}

/// Left Riemann sum with `pieces` cells.
fn fine_riemann(germ: &ProductGerm, pieces: usize) -> f64 {
    let h = 1.0 / pieces as f64;
    let mut out = [0.0];
    (0..pieces)
        .map(|j| {
            germ.eval(j as f64 * h, (j + 1) as f64 * h, &mut out);
            out[0]
        })
        .sum()
}

/// Smooth data have finite 1-variation, so the sewing defect decays like
/// `2^{-k(2/p - 1)} = 2^{-k}`.
const SMOOTH_EXPONENT: f64 = 1.0;

pub fn sewing_convergence(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["refinements"])?;
    p.no_field()?;
    let levels = p.positive("refinements")?;
    if !(4..=24).contains(&levels) {
        return Err(config_err("refinements must lie in 4..=24"));
    }
    Ok(Box::new(move || {
        let cases: [(&str, ProductGerm, f64); 2] = [
            // int_0^1 cos(t) d(t^2) = 2 (cos 1 + sin 1) - 2
            ("cos d(t^2)", ProductGerm { f: f64::cos, g: |t| t * t }, 2.0 * (1f64.cos() + 1f64.sin()) - 2.0),
            // int_0^1 sin(3t) d(e^t) = e (sin 3 - 3 cos 3)/10 + 3/10
            ("sin(3t) d(e^t)", ProductGerm { f: |t| (3.0 * t).sin(), g: f64::exp }, {
                let e = 1f64.exp();
                e * (3f64.sin() - 3.0 * 3f64.cos()) / 10.0 + 0.3
            }),
        ];
        let mut out = Outcome::default();
        let (mut worst_rate, mut worst_oracle, mut worst_exact) = (0.0_f64, 0.0_f64, 0.0_f64);
        let mut decaying = true;
        for (label, germ, exact) in &cases {
            let opts = SewOptions { max_level: levels as u32, tolerance: 0.0, extrapolate: true };
            let (value, diag) = sew(germ, TimeGrid::unit(1)?, 0, 1, opts)?;
            for (k, d) in diag.level_deltas.iter().enumerate() {
                out.point(*label, 2f64.powi(-(k as i32 + 1)), *d, 0.0);
            }
            let rate = diag.fitted_rate.unwrap_or(0.0);
            let oracle = fine_riemann(germ, 1 << 24);
            worst_rate = worst_rate.max((rate - SMOOTH_EXPONENT).abs() / SMOOTH_EXPONENT);
            worst_oracle = worst_oracle.max((value[0] - oracle).abs());
            worst_exact = worst_exact.max((value[0] - exact).abs());
            decaying &= diag.decaying;
            out.stat(format!("{label}/fitted_rate"), rate);
        }
        out.stat("predicted_rate", SMOOTH_EXPONENT);
        out.stat("max_rate_rel_error", worst_rate);
        out.stat("max_oracle_error", worst_oracle);
        out.stat("max_exact_error", worst_exact);
        out.diverged = !decaying;
        Ok(out)
    }))
}

/// All `2^(n-2)` partitions of `v`, summed left to right.
pub fn enumerate_p_variation(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    let mut best = 0.0_f64;
    for mask in 0u64..(1 << (n - 2)) {
        let (mut last, mut sum) = (0, 0.0);
        for k in 1..n {
            if k == n - 1 || mask & (1 << (k - 1)) != 0 {
                sum += (v[k] - v[last]).abs().powf(p);
                last = k;
            }
        }
        best = best.max(sum);
    }
    best.powf(1.0 / p)
}

pub fn pvar_oracle(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["cases", "points"])?;
    p.no_field()?;
    let cases = p.positive("cases")?;
    let points = p.positive("points")?;
    if !(3..=20).contains(&points) {
        return Err(config_err("exhaustive enumeration needs 3..=20 points"));
    }
    let seed = p.seed();
    Ok(Box::new(move || {
        let mut out = Outcome::default();
        let (mut mismatches, mut max_diff) = (0usize, 0.0_f64);
        let mut rows = String::from("case,p,dp,enumerated\n");
        for c in 0..cases {
            let mut rng = stream(seed, "pvar-case", c as u64);
            let v: Vec<f64> = (0..points).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pe = rng.random_range(1.0..3.0);
            let path = DiscretePath::scalar(TimeGrid::unit(points - 1)?, v.clone())?;
            let dp = p_variation(&path, pe, PVarMethod::ExactDp)?.value;
            let brute = enumerate_p_variation(&v, pe);
            mismatches += usize::from(dp != brute);
            max_diff = max_diff.max((dp - brute).abs());
            rows.push_str(&format!("{c},{pe:e},{dp:e},{brute:e}\n"));
            out.point("dp vs enumeration", brute, dp, 0.0);
        }
        out.stat("cases", cases as f64);
        out.stat("mismatches", mismatches as f64);
        out.stat("max_abs_difference", max_diff);
        out.artifact("cases.csv", rows.into_bytes());
        Ok(out)
    }))
}

/// `dx = dA x + dz` for rough matrix paths `A = c B` of growing size `c`.
pub fn affine_young_bound(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["cases", "hurst", "n_steps", "p"])?;
    p.no_field()?;
    let cases = p.positive("cases")?;
    let h = p.hurst()?;
    let n = p.positive("n_steps")?;
    let pv = p.number("p");
    check_hurst(h)?;
    if !(1.0..2.0).contains(&pv) {
        return Err(config_err(format!("affine Young equation needs 1 <= p < 2, got {pv}")));
    }
    if !(h * pv > 1.0 && h < 1.0) {
        return Err(config_err(format!("fBm has finite p-variation only for p > 1/H: H p = {} must exceed 1", h * pv)));
    }
    if cases < 3 {
        return Err(config_err("need at least three cases for a regression"));
    }
    let seed = p.seed();
    Ok(Box::new(move || {
        let grid = TimeGrid::unit(n)?;
        let factor = cached_factor(h, grid)?;
        let mut out = Outcome::default();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let mut blow_ups = 0usize;
        let mut worst_constant = 0.0_f64;
        for c in 0..cases {
            let scale = 3.0 * (c + 1) as f64 / cases as f64;
            let b = factor.sample(4, derive_seed(seed, "matrix", c as u64))?;
            let a = DiscretePath::from_fbm(&b).map(|v| v.iter().map(|x| scale * x).collect())?;
            let z = DiscretePath::from_fbm(&factor.sample(2, derive_seed(seed, "forcing", c as u64))?);
            match solve_affine_young(&a, &z, &[1.0, 0.0], pv, pv) {
                Ok(sol) => {
                    let bd = sol.bound;
                    if !bd.sup_norm.is_finite() {
                        blow_ups += 1;
                        continue;
                    }
                    xs.push(bd.a_power);
                    ys.push(bd.sup_norm.ln());
                    worst_constant = worst_constant.max(bd.measured_constant);
                    out.point("log sup|x|", bd.a_power, bd.sup_norm.ln(), 0.0);
                }
                Err(e) if e.is_divergence() => blow_ups += 1,
                Err(e) => return Err(e.into()),
            }
        }
        let fit = ScalingFit::linear(&xs, &ys)?;
        for &x in &xs {
            out.point("fit", x, fit.predict(x), 0.0);
        }
        out.stat("cases", cases as f64);
        out.stat("blow_ups", blow_ups as f64);
        out.stat("slope", fit.slope);
        out.stat("r_squared", fit.r_squared);
        out.stat("max_measured_constant", worst_constant);
        out.stat("max_a_power", xs.iter().copied().fold(0.0, f64::max));
        out.diverged = blow_ups > 0;
        Ok(out)
    }))
}
