use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fields::{weierstrass, Constant, Linear, SignPower, SpatialField, TrigSeries, Zero};
use super::{DriftField, TimeProfile};
use crate::error::{invalid, Result};

/// Named field plus numeric parameters, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

const TIME_KEYS: [&str; 5] = ["time_scale", "time_exponent", "time_origin", "q", "dim"];

struct Params<'a> {
    spec: &'a FieldSpec,
}

impl Params<'_> {
    fn get(&self, key: &str, default: f64) -> f64 {
        self.spec.params.get(key).copied().unwrap_or(default)
    }
    fn require(&self, key: &str) -> Result<f64> {
        self.spec
            .params
            .get(key)
            .copied()
            .ok_or_else(|| invalid(format!("field `{}` needs parameter `{key}`", self.spec.name)))
    }
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.spec.params.keys() {
            if !allowed.contains(&k.as_str()) && !TIME_KEYS.contains(&k.as_str()) {
                return Err(invalid(format!("unknown parameter `{k}` for field `{}`", self.spec.name)));
            }
        }
        Ok(())
    }
}

/// Names understood by [`build_drift`].
pub const FIELD_NAMES: [&str; 6] = ["zero", "constant", "linear", "sine", "sign-power", "weierstrass"];

/// Build a drift from the registry.
///
/// Shared keys: `time_scale`, `time_exponent`, `time_origin` select the time
/// factor `scale (t - origin)_+^(-exponent)`; `q` is the declared time
/// integrability (default infinite); `dim` the dimension where supported.
pub fn build_drift(spec: &FieldSpec) -> Result<DriftField> {
    let p = Params { spec };
    let dim = p.get("dim", 1.0);
    if dim < 1.0 || dim.fract() != 0.0 {
        return Err(invalid(format!("dim must be a positive integer, got {dim}")));
    }
    let dim = dim as usize;
    let (spatial, alpha): (Arc<dyn SpatialField>, f64) = match spec.name.as_str() {
        "zero" => {
            p.check_keys(&[])?;
            (Arc::new(Zero { dim }), 1.0)
        }
        "constant" => {
            p.check_keys(&["value"])?;
            (Arc::new(Constant { value: vec![p.require("value")?; dim] }), 1.0)
        }
        "linear" => {
            p.check_keys(&["slope"])?;
            let s = p.require("slope")?;
            let mut m = vec![0.0; dim * dim];
            for i in 0..dim {
                m[i * dim + i] = s;
            }
            (Arc::new(Linear { matrix: m, dim }), 1.0)
        }
        "sine" => {
            p.check_keys(&["amplitude", "frequency"])?;
            one_dim(dim, "sine")?;
            (Arc::new(TrigSeries::sine(p.get("amplitude", 1.0), p.get("frequency", 1.0))), 1.0)
        }
        "sign-power" => {
            p.check_keys(&["alpha", "cap"])?;
            let a = p.require("alpha")?;
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid(format!("sign-power exponent must lie in (0,1), got {a}")));
            }
            (Arc::new(SignPower { alpha: a, cap: p.get("cap", 10.0), dim }), a)
        }
        "weierstrass" => {
            p.check_keys(&["alpha", "lambda", "k_min", "k_max", "amplitude"])?;
            one_dim(dim, "weierstrass")?;
            let a = p.require("alpha")?;
            let field = weierstrass(
                a,
                p.get("lambda", 2.0),
                p.get("k_min", 0.0) as i32,
                p.get("k_max", 12.0) as i32,
                p.get("amplitude", 1.0),
            );
            (Arc::new(field), a)
        }
        other => return Err(invalid(format!("unknown field `{other}`; known: {}", FIELD_NAMES.join(", ")))),
    };
    let scale = p.get("time_scale", 1.0);
    let exponent = p.get("time_exponent", 0.0);
    let origin = p.get("time_origin", 0.0);
    let profile = if exponent == 0.0 && origin == 0.0 {
        TimeProfile::Constant(scale)
    } else {
        TimeProfile::Power { scale, origin, exponent }
    };
    DriftField::new(spatial, profile, alpha, p.get("q", f64::INFINITY))
}

fn one_dim(dim: usize, name: &str) -> Result<()> {
    if dim != 1 {
        return Err(invalid(format!("field `{name}` is one-dimensional")));
    }
    Ok(())
}
