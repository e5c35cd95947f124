use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::catalog::{default_config, find};
use crate::config::{ExperimentConfig, Params};
use crate::error::{config_err, LabError, LabResult};
use crate::experiments::Job;
use crate::outcome::Outcome;

/// Overrides `experiment.output_dir` when set.
pub const OUTPUT_ROOT_ENV: &str = "REGNOISE_OUTPUT_ROOT";

const DIGEST_PREFIX: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Written as `manifest.json` in the run directory. Contains nothing that
/// varies between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub criterion: u8,
    pub code_version: String,
    pub config: serde_json::Value,
    pub files: Vec<FileRecord>,
    pub headline: BTreeMap<String, f64>,
    pub diverged: bool,
    pub digest: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub run_dir: PathBuf,
    #[serde(serialize_with = "as_seconds")]
    pub wall_time: Duration,
}

fn as_seconds<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn plan(cfg: &ExperimentConfig) -> LabResult<Job> {
    (find(&cfg.experiment.name)?.plan)(cfg)
}

/// Check a config (including regime preconditions) without running it.
pub fn validate(cfg: &ExperimentConfig) -> LabResult<()> {
    plan(cfg).map(drop)
}

struct Executed {
    outcome: Outcome,
    files: Vec<(String, Vec<u8>)>,
    digest: String,
}

fn execute(cfg: &ExperimentConfig) -> LabResult<Executed> {
    let outcome = plan(cfg)?()?;
    let mut files = outcome.artifacts.clone();
    files.push(("series.csv".into(), outcome.series_csv().into_bytes()));
    let mut headline = serde_json::to_vec_pretty(&outcome.headline).expect("headline serializes");
    headline.push(b'\n');
    files.push(("headline.json".into(), headline));
    files.sort_by(|a, b| a.0.cmp(&b.0));
    if files.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(config_err("experiment produced two artifacts with the same name"));
    }
    let mut h = Sha256::new();
    h.update(format!("regnoise-lab {}\n{}\n", env!("CARGO_PKG_VERSION"), cfg.canonical()));
    for (name, bytes) in &files {
        h.update(format!("{name}\n{}\n", bytes.len()));
        h.update(bytes);
    }
    Ok(Executed { outcome, files, digest: format!("{:x}", h.finalize()) })
}

/// Digest of a run without writing anything.
pub fn run_digest(cfg: &ExperimentConfig) -> LabResult<String> {
    Ok(execute(cfg)?.digest)
}

/// Output root: the environment override, else the config's `output_dir`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| cfg.experiment.output_dir.clone())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> LabResult<RunSummary> {
    run_experiment_in(cfg, &output_root(cfg))
}

/// Run and write artifacts to `<root>/<digest prefix>/`.
pub fn run_experiment_in(cfg: &ExperimentConfig, root: &Path) -> LabResult<RunSummary> {
    let entry = find(&cfg.experiment.name)?;
    let start = Instant::now();
    let done = execute(cfg)?;
    let wall_time = start.elapsed();
    let dir = root.join(&done.digest[..DIGEST_PREFIX]);
    std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let mut records = Vec::new();
    for (name, bytes) in &done.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        records.push(FileRecord { name: name.clone(), bytes: bytes.len(), sha256: hex(bytes) });
    }
    let manifest = Manifest {
        experiment: entry.name.to_string(),
        criterion: entry.criterion,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::from_str(&cfg.canonical()).expect("canonical config is JSON"),
        files: records,
        headline: done.outcome.headline,
        diverged: done.outcome.diverged,
        digest: done.digest,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    text.push(b'\n');
    std::fs::write(&path, text).map_err(|e| LabError::io(&path, e))?;
    Ok(RunSummary { manifest, run_dir: dir, wall_time })
}

/// Re-runs the reference configs of the listed experiments twice each and
/// compares digests.
pub(crate) fn determinism(cfg: &ExperimentConfig) -> LabResult<Job> {
    let p = Params::new(cfg, &["experiments"])?;
    p.no_field()?;
    let names = p.strings("experiments");
    if names.is_empty() {
        return Err(config_err("list at least one experiment"));
    }
    let mut configs = Vec::new();
    for name in &names {
        if name == "determinism" {
            return Err(config_err("determinism cannot re-run itself"));
        }
        let c = default_config(name)?;
        validate(&c)?;
        configs.push(c);
    }
    Ok(Box::new(move || {
        let mut out = Outcome::default();
        let mut mismatches = 0usize;
        let mut digests = BTreeMap::new();
        for c in &configs {
            let (a, b) = (run_digest(c)?, run_digest(c)?);
            mismatches += usize::from(a != b);
            out.flag(format!("{}/reproduced", c.experiment.name), a == b);
            digests.insert(c.experiment.name.clone(), a);
        }
        out.stat("mismatches", mismatches as f64);
        out.json_artifact("digests.json", &digests);
        Ok(out)
    }))
}
