//! Acceptance suite: runs the reference config of every catalog experiment
//! and prints one PASS/FAIL line per criterion. Exits non-zero on failure.

use std::collections::BTreeMap;
use std::time::Duration;

use regnoise_lab::{default_config, list_experiments, run_digest, run_experiment_in, RunSummary};

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn both(a: Verdict, b: Verdict) -> Verdict {
    Verdict { pass: a.pass && b.pass, detail: format!("{}; {}", a.detail, b.detail) }
}

/// Runtime budgets in seconds.
fn budget(criterion: u8) -> f64 {
    match criterion {
        1 | 2 | 5 | 10 => 60.0,
        3 | 4 => 10.0,
        6 | 8 | 12 => 1200.0,
        7 | 11 => 900.0,
        9 => 120.0,
        13 => 600.0,
        14 => 300.0,
        _ => 60.0,
    }
}

fn judge(criterion: u8, h: &BTreeMap<String, f64>) -> Verdict {
    let g = |k: &str| h.get(k).copied().unwrap_or(f64::NAN);
    match criterion {
        1 => {
            let spreads: Vec<f64> = ["0.25", "0.5", "0.75"].iter().map(|x| g(&format!("H={x}/spread"))).collect();
            let unit = (g("H=0.5/min_ratio") - 1.0).abs().max((g("H=0.5/max_ratio") - 1.0).abs());
            both(
                check(spreads.iter().all(|s| *s < 0.05), format!("ratio spreads {spreads:.4?} < 5%")),
                check(unit < 1e-6, format!("|constant - 1| at H=1/2 = {unit:.1e} < 1e-6")),
            )
        }
        2 => check(
            g("entries_beyond_3se") == 0.0,
            format!("{} of {} entries beyond 3 SE (max z = {:.2})", g("entries_beyond_3se"), g("entries"), g("max_z")),
        ),
        3 => both(
            check(g("max_rate_rel_error") < 0.1, format!("rate error {:.3} < 10%", g("max_rate_rel_error"))),
            check(g("max_oracle_error") < 1e-6, format!("oracle error {:.1e} < 1e-6", g("max_oracle_error"))),
        ),
        4 => check(g("mismatches") == 0.0, format!("{} mismatches in {} cases", g("mismatches"), g("cases"))),
        5 => check(
            g("blow_ups") == 0.0 && g("slope") > 0.0 && g("max_measured_constant").is_finite(),
            format!("no blow-up, slope {:.4} > 0, R^2 = {:.3}", g("slope"), g("r_squared")),
        ),
        6 => both(
            check(
                (g("slope") - g("predicted_slope")).abs() < 0.1,
                format!("slope {:.4} vs predicted {:.4}", g("slope"), g("predicted_slope")),
            ),
            check(g("r_squared") >= 0.9, format!("R^2 = {:.4}", g("r_squared"))),
        ),
        7 => {
            let ok = |l: &str| (g(&format!("{l}/slope")) - 1.0).abs() <= 0.2 && g(&format!("{l}/r_squared")) >= 0.9;
            check(
                ok("initial") && ok("drift") && g("replicates") >= 200.0,
                format!(
                    "slopes {:.4} (initial), {:.4} (drift); R^2 {:.4}, {:.4}",
                    g("initial/slope"),
                    g("drift/slope"),
                    g("initial/r_squared"),
                    g("drift/r_squared")
                ),
            )
        }
        8 => check(
            g("mean_monotone") == 1.0 && g("replicates") >= 200.0,
            format!("mean deltas {:.4} {:.4} {:.4} (10% slack)", g("delta_1"), g("delta_2"), g("delta_3")),
        ),
        9 => {
            let tol = 10.0 * g("solver_tolerance");
            check(
                g("semiflow_residual") < tol && g("fd_relative_error") < 1e-3 && g("inverse_residual") < 1e-6,
                format!(
                    "composition {:.1e} < {tol:.0e}, FD {:.1e} < 1e-3, JK-I {:.1e} < 1e-6",
                    g("semiflow_residual"),
                    g("fd_relative_error"),
                    g("inverse_residual")
                ),
            )
        }
        10 => check(g("max_sup_error") < 1e-4, format!("sup error {:.1e} < 1e-4", g("max_sup_error"))),
        11 => {
            let devs: Vec<f64> = ["0.35", "0.5", "0.75"].iter().map(|x| g(&format!("H={x}/deviation"))).collect();
            check(devs.iter().all(|d| d.abs() <= 0.15), format!("median rho - 1/(2H) = {devs:.3?}, within 0.15"))
        }
        12 => both(
            check(
                g("min_upper_fraction") >= 0.75 && g("min_mirrored_fraction") >= 0.75 && g("mirror_error") == 0.0,
                format!(
                    "upper {:.3}, mirrored {:.3} at horizon {}",
                    g("min_upper_fraction"),
                    g("min_mirrored_fraction"),
                    g("best_horizon")
                ),
            ),
            check(
                g("control/gap_decreasing") == 1.0 && g("control/last_gap") < 0.1 * g("control/first_gap"),
                format!("control gap {:.3} -> {:.4}", g("control/first_gap"), g("control/last_gap")),
            ),
        ),
        13 => check(
            g("ratio") < 1.0 && g("r_squared") >= 0.9 && g("zero_kernel/first_distance") == 0.0,
            format!("ratio {:.3}, R^2 {:.3}, g=0 distance {}", g("ratio"), g("r_squared"), g("zero_kernel/first_distance")),
        ),
        14 => check(
            g("zero_drift_max_error") == 0.0
                && g("mass_rel_error_finest") <= 1e-3
                && g("mass_order") >= 1.0
                && g("duality_order") >= 1.0,
            format!(
                "b=0 error {}, mass {:.1e} (order {:.2}), duality order {:.2}",
                g("zero_drift_max_error"),
                g("mass_rel_error_finest"),
                g("mass_order"),
                g("duality_order")
            ),
        ),
        15 => check(g("mismatches") == 0.0, format!("{} digest mismatches in the determinism run", g("mismatches"))),
        _ => check(false, "no such criterion"),
    }
}

fn main() {
    let root = tempfile::tempdir().expect("temporary output root");
    let mut failed = 0;
    let mut summaries: Vec<(String, RunSummary)> = Vec::new();
    for entry in list_experiments() {
        let cfg = default_config(entry.name).expect("reference config parses");
        let verdict = match run_experiment_in(&cfg, root.path()) {
            Ok(s) => {
                let v = judge(entry.criterion, &s.manifest.headline);
                let secs = s.wall_time.as_secs_f64();
                let v = both(v, check(secs < budget(entry.criterion), format!("{secs:.1} s")));
                summaries.push((entry.name.to_string(), s));
                v
            }
            Err(e) => check(false, format!("run failed: {e}")),
        };
        let verdict = if entry.criterion == 15 {
            // every other experiment must also reproduce its written digest
            let mut bad = Vec::new();
            for (name, s) in summaries.iter().filter(|(n, _)| n != "determinism") {
                let again = run_digest(&default_config(name).unwrap()).map_err(|e| e.to_string());
                if again.as_deref() != Ok(s.manifest.digest.as_str()) {
                    bad.push(name.clone());
                }
            }
            both(verdict, check(bad.is_empty(), format!("re-run digests differ for {bad:?}")))
        } else {
            verdict
        };
        failed += usize::from(!verdict.pass);
        println!(
            "criterion {:>2} {} [{}] {}",
            entry.criterion,
            if verdict.pass { "PASS" } else { "FAIL" },
            entry.name,
            verdict.detail
        );
    }
    let total: Duration = summaries.iter().map(|(_, s)| s.wall_time).sum();
    println!("acceptance: {} of 15 criteria passed ({:.0} s of experiment time)", 15 - failed, total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
