use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

/// One row of the tidy plot table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

/// What an experiment hands back to the runner.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub headline: BTreeMap<String, f64>,
    pub series: Vec<Point>,
    /// Extra files, written verbatim under the run directory.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub diverged: bool,
}

impl Outcome {
    pub fn stat(&mut self, key: impl Into<String>, value: f64) {
        self.headline.insert(key.into(), value);
    }

    pub fn flag(&mut self, key: impl Into<String>, value: bool) {
        self.stat(key, if value { 1.0 } else { 0.0 });
    }

    pub fn point(&mut self, series: impl Into<String>, x: f64, y: f64, y_err: f64) {
        // series names end up unquoted in CSV
        let series: String = series.into();
        let series = series.replace(',', ";");
        self.series.push(Point { series, x, y, y_err });
    }

    pub fn artifact(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.push((name.into(), bytes));
    }

    pub fn json_artifact(&mut self, name: impl Into<String>, value: &impl Serialize) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        self.artifact(name, bytes);
    }

    pub(crate) fn series_csv(&self) -> String {
        let mut s = String::from("series,x,y,y_err\n");
        for p in &self.series {
            writeln!(s, "{},{:e},{:e},{:e}", p.series, p.x, p.y, p.y_err).unwrap();
        }
        s
    }
}

/// Render any `write_csv`-style exporter into bytes.
pub(crate) fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}
