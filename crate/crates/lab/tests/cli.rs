use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use regnoise_lab::{
    default_config, emit_plot_data, list_experiments, run_experiment_in, validate, ExperimentConfig, LabError,
    PlotKind,
};

const GOLDEN_DIGEST: &str = "e45adf271dd7f86bd1af43b5c896c68f9904a85cf07c9437504b7a9f2563567d";

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

fn with_params(name: &str, params: &str) -> String {
    format!("[experiment]\nname = \"{name}\"\nseed = 3\noutput_dir = \"runs\"\n\n[parameters]\n{params}\n")
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn catalog_covers_every_criterion_once() {
    let list = list_experiments();
    let names: Vec<&str> = list.iter().map(|e| e.name).collect();
    assert!(names.contains(&"rho-irregularity") && names.contains(&"lnd-constant"));
    let criteria: BTreeSet<u8> = list.iter().map(|e| e.criterion).collect();
    assert_eq!(criteria, (1..=15).collect());
    assert_eq!(list.len(), 15);
    let again: Vec<&str> = list_experiments().iter().map(|e| e.name).collect();
    assert_eq!(names, again);
}

#[test]
fn golden_run_matches_frozen_digest() {
    let cfg = ExperimentConfig::load(config_path("lnd-constant-h05")).unwrap();
    let root = tempfile::tempdir().unwrap();
    let s = run_experiment_in(&cfg, root.path()).unwrap();
    assert_eq!(s.manifest.digest, GOLDEN_DIGEST);
    assert!(s.run_dir.ends_with(&GOLDEN_DIGEST[..16]));
}

#[test]
fn rerun_after_deleting_outputs_is_byte_identical() {
    let cfg = default_config("stability-rate").unwrap();
    let root = tempfile::tempdir().unwrap();
    let first = run_experiment_in(&cfg, root.path()).unwrap();
    let before = read_dir(&first.run_dir);
    fs::remove_dir_all(&first.run_dir).unwrap();
    let second = run_experiment_in(&cfg, root.path()).unwrap();
    assert_eq!(first.run_dir, second.run_dir);
    assert_eq!(before, read_dir(&second.run_dir));
    let names: Vec<&str> = before.iter().map(|f| f.0.as_str()).collect();
    for required in ["headline.json", "manifest.json", "series.csv"] {
        assert!(names.contains(&required), "{names:?}");
    }
}

#[test]
fn seed_changes_the_digest_but_output_dir_does_not() {
    let base = default_config("fbm-law").unwrap();
    let mut moved = base.clone();
    moved.experiment.output_dir = "elsewhere".into();
    let mut reseeded = base.clone();
    reseeded.experiment.seed += 1;
    let d = |c| regnoise_lab::run_digest(c).unwrap();
    assert_eq!(d(&base), d(&moved));
    assert_ne!(d(&base), d(&reseeded));
}

#[test]
fn out_of_regime_alpha_is_a_validation_error() {
    let text = with_params("stability-rate", "alpha = -0.9\nhurst = 0.5\nn_steps = 64\nq = 2\nreplicates = 4");
    let err = validate(&ExperimentConfig::parse(&text).unwrap()).unwrap_err();
    assert!(err.to_string().contains("1 - 1/(q' H)"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn malformed_configs_are_rejected() {
    let unknown = with_params("stability-rate", "alpha = 0.5\nhurst = 0.5\nn_steps = 64\nq = 2\nreplicates = 4\nbogus = 1");
    assert!(matches!(ExperimentConfig::parse(&unknown), Err(LabError::Config(_))));

    let no_seed = "[experiment]\nname = \"fbm-law\"\noutput_dir = \"runs\"\n[parameters]\n";
    let err = ExperimentConfig::parse(no_seed).unwrap_err();
    assert!(err.to_string().contains("seed"), "{err}");

    let missing = with_params("stability-rate", "alpha = 0.5\nhurst = 0.5\nq = 2\nreplicates = 4");
    let err = validate(&ExperimentConfig::parse(&missing).unwrap()).unwrap_err();
    assert!(err.to_string().contains("n_steps"), "{err}");

    let ghost = with_params("no-such-experiment", "");
    let err = validate(&ExperimentConfig::parse(&ghost).unwrap()).unwrap_err();
    assert!(matches!(err, LabError::UnknownExperiment(_)));
}

#[test]
fn loglog_plot_has_fixed_columns() {
    let root = tempfile::tempdir().unwrap();
    let s = run_experiment_in(&default_config("stability-rate").unwrap(), root.path()).unwrap();
    let path = emit_plot_data(&s.run_dir, PlotKind::LogLog).unwrap();
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("series,log_x,log_y,fit_y"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
    assert!("tidy".parse::<PlotKind>().is_ok() && "bars".parse::<PlotKind>().is_err());
}

#[test]
fn plotting_an_empty_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("series.csv"), "series,x,y,y_err\n").unwrap();
    assert!(emit_plot_data(dir.path(), PlotKind::Tidy).is_err());
    assert!(!dir.path().join("plot-tidy.csv").exists());

    let missing = tempfile::tempdir().unwrap();
    assert!(matches!(emit_plot_data(missing.path(), PlotKind::LogLog), Err(LabError::MissingArtifact(_))));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_regnoise");
    let list = Command::new(bin).arg("list").output().unwrap();
    assert_eq!(list.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&list.stdout).matches("criterion").count(), 15);

    let ok = Command::new(bin).args(["validate", &config_path("rho-irregularity")]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, with_params("stability-rate", "alpha = -0.9\nhurst = 0.5\nn_steps = 64\nq = 2\nreplicates = 4"))
        .unwrap();
    let out = Command::new(bin).arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 - 1/(q' H)"));

    let run = Command::new(bin)
        .args(["run", &config_path("lnd-constant-h05")])
        .env("REGNOISE_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(dir.path().join(&GOLDEN_DIGEST[..16]).join("manifest.json").exists());
}
