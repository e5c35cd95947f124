//! Plot-ready tables derived from a run's `series.csv`.
//!
//! * `tidy`: `series,x,y,y_err`, one row per point.
//! * `loglog`: `series,log_x,log_y,fit_y` with natural logs and the
//!   least-squares line of each series; points with `x <= 0` or `y <= 0`
//!   are dropped.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use regnoise::stats::ScalingFit;

use crate::error::{config_err, LabError, LabResult};
use crate::outcome::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Tidy,
    LogLog,
}

impl FromStr for PlotKind {
    type Err = LabError;
    fn from_str(s: &str) -> LabResult<Self> {
        match s {
            "tidy" => Ok(PlotKind::Tidy),
            "loglog" => Ok(PlotKind::LogLog),
            _ => Err(config_err(format!("unknown plot kind `{s}` (tidy, loglog)"))),
        }
    }
}

fn read_series(run_dir: &Path) -> LabResult<Vec<Point>> {
    let path = run_dir.join("series.csv");
    let text = std::fs::read_to_string(&path).map_err(|_| LabError::MissingArtifact(path.display().to_string()))?;
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let num = |i: usize| cols.get(i).and_then(|c| c.parse::<f64>().ok());
        match (cols.len(), num(1), num(2), num(3)) {
            (4, Some(x), Some(y), Some(y_err)) => points.push(Point { series: cols[0].to_string(), x, y, y_err }),
            _ => return Err(LabError::MissingArtifact(format!("{}: malformed line {}", path.display(), k + 1))),
        }
    }
    Ok(points)
}

/// Write `plot-<kind>.csv` into the run directory and return its path.
/// Nothing is written when there is nothing to plot.
pub fn emit_plot_data(run_dir: &Path, kind: PlotKind) -> LabResult<PathBuf> {
    let points = read_series(run_dir)?;
    let mut out = String::new();
    let name = match kind {
        PlotKind::Tidy => {
            out.push_str("series,x,y,y_err\n");
            for p in points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
                out.push_str(&format!("{},{:e},{:e},{:e}\n", p.series, p.x, p.y, p.y_err));
            }
            "plot-tidy.csv"
        }
        PlotKind::LogLog => {
            out.push_str("series,log_x,log_y,fit_y\n");
            let mut names: Vec<&str> = points.iter().map(|p| p.series.as_str()).collect();
            names.dedup();
            for s in names {
                let (lx, ly): (Vec<f64>, Vec<f64>) = points
                    .iter()
                    .filter(|p| p.series == s && p.x > 0.0 && p.y > 0.0)
                    .map(|p| (p.x.ln(), p.y.ln()))
                    .unzip();
                let Ok(fit) = ScalingFit::linear(&lx, &ly) else { continue };
                for (x, y) in lx.iter().zip(&ly) {
                    out.push_str(&format!("{s},{x:e},{y:e},{:e}\n", fit.predict(*x)));
                }
            }
            "plot-loglog.csv"
        }
    };
    if out.lines().count() < 2 {
        return Err(config_err(format!("run in {} has no data for a {kind:?} plot", run_dir.display())));
    }
    let path = run_dir.join(name);
    std::fs::write(&path, out).map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}
