//! Experiment configs: TOML with three sections.
//!
//! ```toml
//! [experiment]
//! name = "lnd-constant"
//! seed = 1
//! output_dir = "runs"
//!
//! [parameters]
//! hurst = [0.25, 0.5, 0.75]
//! n_steps = 512
//!
//! [field]            # only for experiments that take a registry drift
//! name = "sine"
//! params = { amplitude = 1.0, frequency = 2.0 }
//! ```
//!
//! Every key is documented in `CONFIG_SCHEMA.md`. Unknown keys, keys the
//! experiment does not use and missing keys are all errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use regnoise::drift::FieldSpec;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub parameters: BTreeMap<String, toml::Value>,
    pub field: Option<FieldSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Number,
    Integer,
    NumberList,
    StringList,
    Text,
}

/// Every parameter key understood by some experiment.
pub const PARAMETER_KEYS: [(&str, Kind); 26] = [
    ("alpha", Kind::Number),
    ("branches", Kind::Integer),
    ("cases", Kind::Integer),
    ("control_alpha", Kind::Number),
    ("delta", Kind::Number),
    ("experiments", Kind::StringList),
    ("half_width", Kind::Number),
    ("hurst", Kind::NumberList),
    ("iterations", Kind::Integer),
    ("lattice_points", Kind::Integer),
    ("levels", Kind::NumberList),
    ("m", Kind::Number),
    ("min_horizon_steps", Kind::Integer),
    ("n_steps", Kind::Integer),
    ("p", Kind::Number),
    ("particles", Kind::Integer),
    ("pasts", Kind::Integer),
    ("paths", Kind::Integer),
    ("points", Kind::Integer),
    ("q", Kind::Number),
    ("q_tilde", Kind::Number),
    ("refinements", Kind::Integer),
    ("replicates", Kind::Integer),
    ("scheme", Kind::Text),
    ("x0", Kind::Number),
    ("x_seq", Kind::NumberList),
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> LabResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        for (key, value) in &cfg.parameters {
            let kind = PARAMETER_KEYS
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, kind)| *kind)
                .ok_or_else(|| config_err(format!("unknown parameter `{key}`")))?;
            check_kind(key, value, kind)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> LabResult<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| LabError::io(path.as_ref(), e))?;
        Self::parse(&text)
    }

    /// Canonical JSON of everything except the output directory; feeds the digest.
    pub(crate) fn canonical(&self) -> String {
        let echo = serde_json::json!({
            "name": self.experiment.name,
            "seed": self.experiment.seed,
            // TOML text keeps non-finite numbers that JSON would turn into null
            "parameters": toml::to_string(&self.parameters).expect("parameters serialize"),
            "field": self.field,
        });
        echo.to_string()
    }
}

fn check_kind(key: &str, v: &toml::Value, kind: Kind) -> LabResult<()> {
    let number = |v: &toml::Value| v.is_float() || v.is_integer();
    let ok = match kind {
        Kind::Number => number(v),
        Kind::Integer => v.as_integer().is_some_and(|i| i >= 0),
        Kind::NumberList => number(v) || v.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(number)),
        Kind::StringList => v.as_array().is_some_and(|a| a.iter().all(|x| x.is_str())),
        Kind::Text => v.is_str(),
    };
    if ok {
        Ok(())
    } else {
        Err(config_err(format!("parameter `{key}` has the wrong type (expected {kind:?})")))
    }
}

/// Typed view of the parameters of one experiment. Construction checks that
/// exactly the `required` keys are present.
pub struct Params<'a> {
    cfg: &'a ExperimentConfig,
}

impl<'a> Params<'a> {
    pub fn new(cfg: &'a ExperimentConfig, required: &[&str]) -> LabResult<Self> {
        let name = &cfg.experiment.name;
        for key in cfg.parameters.keys() {
            if !required.contains(&key.as_str()) {
                return Err(config_err(format!("parameter `{key}` is not used by experiment `{name}`")));
            }
        }
        for key in required {
            if !cfg.parameters.contains_key(*key) {
                return Err(config_err(format!("experiment `{name}` needs parameter `{key}`")));
            }
        }
        Ok(Self { cfg })
    }

    fn value(&self, key: &str) -> &toml::Value {
        &self.cfg.parameters[key]
    }

    pub fn seed(&self) -> u64 {
        self.cfg.experiment.seed
    }

    pub fn number(&self, key: &str) -> f64 {
        let v = self.value(key);
        v.as_float().unwrap_or_else(|| v.as_integer().unwrap_or_default() as f64)
    }

    pub fn integer(&self, key: &str) -> usize {
        self.value(key).as_integer().unwrap_or_default() as usize
    }

    pub fn positive(&self, key: &str) -> LabResult<usize> {
        match self.integer(key) {
            0 => Err(config_err(format!("parameter `{key}` must be positive"))),
            k => Ok(k),
        }
    }

    pub fn numbers(&self, key: &str) -> Vec<f64> {
        match self.value(key).as_array() {
            Some(a) => a.iter().map(|v| v.as_float().unwrap_or_else(|| v.as_integer().unwrap_or_default() as f64)).collect(),
            None => vec![self.number(key)],
        }
    }

    /// Single-valued `hurst`.
    pub fn hurst(&self) -> LabResult<f64> {
        match self.numbers("hurst").as_slice() {
            [h] => Ok(*h),
            _ => Err(config_err("this experiment takes a single `hurst` value")),
        }
    }

    pub fn strings(&self, key: &str) -> Vec<String> {
        self.value(key).as_array().map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect()).unwrap_or_default()
    }

    pub fn scheme(&self) -> LabResult<regnoise::sde::Scheme> {
        let s = self.value("scheme").as_str().unwrap_or_default();
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| config_err(format!("unknown scheme `{s}` (euler, product-trapezoid)")))
    }

    pub fn field(&self) -> LabResult<&'a FieldSpec> {
        self.cfg.field.as_ref().ok_or_else(|| config_err(format!("experiment `{}` needs a [field] section", self.cfg.experiment.name)))
    }

    pub fn no_field(&self) -> LabResult<()> {
        match self.cfg.field {
            Some(_) => Err(config_err(format!("experiment `{}` does not take a [field] section", self.cfg.experiment.name))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[experiment]\nname = \"x\"\nseed = 3\noutput_dir = \"out\"\n";

    #[test]
    fn keys_table_is_sorted_and_unique() {
        assert!(PARAMETER_KEYS.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn unknown_and_mistyped_keys_are_rejected() {
        assert!(ExperimentConfig::parse(&format!("{BASE}[parameters]\nn_stepz = 3\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}[parameters]\nn_steps = 0.5\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}colour = 1\n")).is_err());
        assert!(ExperimentConfig::parse("[experiment]\nname = \"x\"\noutput_dir = \"o\"\n").is_err(), "seed is mandatory");
    }

    #[test]
    fn params_require_exact_key_set() {
        let cfg = ExperimentConfig::parse(&format!("{BASE}[parameters]\nn_steps = 8\nhurst = 0.5\n")).unwrap();
        assert!(Params::new(&cfg, &["n_steps"]).is_err());
        assert!(Params::new(&cfg, &["n_steps", "hurst", "paths"]).is_err());
        let p = Params::new(&cfg, &["n_steps", "hurst"]).unwrap();
        assert_eq!(p.integer("n_steps"), 8);
        assert_eq!(p.hurst().unwrap(), 0.5);
        assert_eq!(p.numbers("hurst"), vec![0.5]);
    }
}
