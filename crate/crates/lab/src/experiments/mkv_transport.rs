use regnoise::drift::{build_drift, classify_regime, DriftField};
use regnoise::fbm::{sample_fbm, TimeGrid};
use regnoise::mkv::{solve_mkv_picard, InitialLaw, MkvProblem};
use regnoise::rng::derive_seed;
use regnoise::stats::ScalingFit;
use regnoise::transport::{duality_check, solve_continuity, solve_continuity_backward, solve_transport};
use regnoise::young::DiscretePath;

use super::Job;
use crate::config::{ExperimentConfig, Params};
use crate::error::{config_err, LabResult};
use crate::outcome::{csv_bytes, Outcome};

/// Picard iteration on laws with interaction kernel `[field]`, plus the
/// same run with no interaction.
pub fn mkv_contraction(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["hurst", "iterations", "n_steps", "particles"])?;
    let h = p.hurst()?;
    let g = build_drift(p.field()?)?;
    if g.dim() != 1 {
        return Err(config_err("mkv-contraction uses a scalar interaction kernel"));
    }
    let problem = MkvProblem {
        f: DriftField::zero(1),
        g,
        hurst: h,
        grid: TimeGrid::unit(p.positive("n_steps")?)?,
        x0: InitialLaw::Gaussian { mean: vec![0.0], std: 0.5 },
        seed: p.seed(),
    };
    let iterations = p.positive("iterations")?;
    if iterations < 4 {
        return Err(config_err("need at least four Picard iterations for a decay fit"));
    }
    let particles = p.positive("particles")?;
    problem.validate()?;
    Ok(Box::new(move || {
        let (_, diag) = solve_mkv_picard(&problem, iterations, particles)?;
        let mut out = Outcome::default();
        for (k, d) in diag.distances.iter().enumerate() {
            out.point("d_E", k as f64, *d, 0.0);
        }
        let fit = diag.fit.clone().ok_or_else(|| config_err("too few positive distances to fit a decay"))?;
        out.stat("ratio", fit.slope.exp());
        out.stat("r_squared", fit.r_squared);
        out.stat("lambda", diag.lambda);
        out.stat("contraction", diag.contraction);
        out.flag("diverged", diag.diverged);
        out.diverged = diag.diverged;
        out.json_artifact("picard.json", &diag);

        let free = MkvProblem { g: DriftField::zero(1), ..problem };
        let (_, d0) = solve_mkv_picard(&free, 2, particles)?;
        out.stat("zero_kernel/first_distance", d0.distances[0]);
        Ok(out)
    }))
}

fn gaussian(x: f64) -> f64 {
    (-x * x).exp() / std::f64::consts::PI.sqrt()
}

/// Characteristic solvers under joint refinement of the time grid and the
/// lattice: closed forms for `b = 0`, mass drift and duality residual.
pub fn transport_continuity(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["half_width", "hurst", "lattice_points", "n_steps", "refinements"])?;
    let h = p.hurst()?;
    let drift = build_drift(p.field()?)?;
    if drift.dim() != 1 || drift.spatial().divergence(&[0.0]).is_none() {
        return Err(config_err(format!("field `{}` must be scalar with a divergence", drift.name())));
    }
    classify_regime(h, drift.q(), drift.alpha())?.require_subcritical()?;
    if !drift.profile().is_q_integrable(1.0) {
        return Err(config_err("transport drift needs an integrable time factor"));
    }
    let n0 = p.positive("n_steps")?;
    let m0 = p.positive("lattice_points")?;
    let levels = p.positive("refinements")?;
    let half = p.number("half_width");
    if levels < 3 || half.is_nan() || half <= 0.0 {
        return Err(config_err("need at least three refinements and a positive half_width"));
    }
    let seed = p.seed();
    Ok(Box::new(move || {
        let mut out = Outcome::default();
        let finest = n0 << (levels - 1);
        let fine = sample_fbm(h, TimeGrid::unit(finest)?, 1, derive_seed(seed, "transport", 0))?;
        let (mut hs, mut mass, mut duality) = (Vec::new(), Vec::new(), Vec::new());
        let mut zero_err = 0.0_f64;
        let mut ledger = Vec::new();
        for k in 0..levels {
            let n = n0 << k;
            let stride = finest / n;
            let vals: Vec<f64> = (0..=n).map(|i| fine.component(0)[i * stride]).collect();
            let noise = DiscretePath::scalar(TimeGrid::unit(n)?, vals)?;
            let m = m0 << k;
            let lattice: Vec<f64> = (0..=m).map(|j| -half + 2.0 * half * j as f64 / m as f64).collect();
            let times = [0, n / 2, n];

            let u = solve_transport(gaussian, &DriftField::zero(1), &noise, &lattice, &times)?;
            for (r, &t) in u.values.iter().zip(&times) {
                for (v, x) in r.iter().zip(&lattice) {
                    zero_err = zero_err.max((v - gaussian(x - noise.at(t)[0])).abs());
                }
            }

            let rho = solve_continuity(gaussian, &drift, &noise, &lattice, &times)?;
            let u = solve_transport(|x| (0.5 * x).cos(), &drift, &noise, &lattice, &[0, n])?;
            let back = solve_continuity_backward(|x| gaussian(x - 0.3), &drift, &noise, &lattice, &[0, n])?;
            let res = duality_check(&u, &back)?;
            hs.push(1.0 / n as f64);
            mass.push(rho.mass_drift());
            duality.push(res);
            out.point("mass drift", 1.0 / n as f64, rho.mass_drift(), 0.0);
            out.point("duality residual", 1.0 / n as f64, res, 0.0);
            ledger.push(serde_json::json!({ "n_steps": n, "lattice_points": m + 1, "mass": rho.mass, "duality_residual": res }));
            if k == levels - 1 {
                out.artifact("density.csv", csv_bytes(|w| rho.write_csv(w)));
                out.stat("sobolev_seminorm_p2_final", u.sobolev_seminorm(1, 2.0));
            }
        }
        out.json_artifact("mass_ledger.json", &ledger);
        out.stat("zero_drift_max_error", zero_err);
        out.stat("mass_rel_error_finest", *mass.last().unwrap());
        out.stat("mass_order", ScalingFit::loglog(&hs, &mass)?.slope);
        out.stat("duality_finest", *duality.last().unwrap());
        out.stat("duality_order", ScalingFit::loglog(&hs, &duality)?.slope);
        Ok(out)
    }))
}
