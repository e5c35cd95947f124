use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

type ControlClosure = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Control `w(s,t)`: continuous, vanishing on the diagonal, superadditive.
#[derive(Clone)]
pub struct ControlFn {
    w: Arc<ControlClosure>,
    provenance: String,
}

impl fmt::Debug for ControlFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlFn").field("provenance", &self.provenance).finish()
    }
}

impl ControlFn {
    pub fn new(w: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, provenance: impl Into<String>) -> Self {
        Self { w: Arc::new(w), provenance: provenance.into() }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        if t <= s {
            0.0
        } else {
            (self.w)(s, t)
        }
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

const QUAD_TOL: f64 = 1e-11;
const MAX_DEPTH: u32 = 10;

/// `r = a + (b - a) phi(u)` with `phi(u) = u^6 / (u^6 + (1-u)^6)` flattens
/// power singularities at both ends before tanh-sinh sees them.
fn graded(f: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64, tol: f64) -> quadrature::Output {
    let h = b - a;
    quadrature::double_exponential::integrate(
        |u: f64| {
            let (p, q) = (u.powi(6), (1.0 - u).powi(6));
            let den = p + q;
            let phi = p / den;
            let dphi = 6.0 * (u.powi(5) * q + p * (1.0 - u).powi(5)) / (den * den);
            if dphi == 0.0 {
                0.0
            } else {
                f(a + h * phi) * h * dphi
            }
        },
        0.0,
        1.0,
        tol,
    )
}

fn adaptive(f: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let out = graded(f, a, b, tol);
    if !out.integral.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integral on [{a}, {b}]")));
    }
    if out.error_estimate <= tol * out.integral.abs().max(1.0) || depth == 0 || b - a < 1e-12 {
        return Ok(out.integral);
    }
    let m = 0.5 * (a + b);
    Ok(adaptive(f, a, m, tol, depth - 1)? + adaptive(f, m, b, tol, depth - 1)?)
}

/// `w(s,t) = int_s^t g(r)^q dr` by adaptive tanh-sinh quadrature.
///
/// The control is evaluated as `W(t) - W(s)` with `W(t) = w(0,t)`, which
/// makes it exactly additive up to rounding.
pub fn control_from_profile(g: impl Fn(f64) -> f64 + Send + Sync + 'static, q: f64) -> Result<ControlFn> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid(format!("control exponent must be finite and >= 1, got {q}")));
    }
    let integrand: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r| g(r).abs().powf(q));
    // A non-integrable endpoint singularity puts comparable mass on every
    // scale; an integrable one decays geometrically.
    for (near, mid, far) in [(1e-12, 1e-8, 1e-4), (1.0 - 1e-12, 1.0 - 1e-8, 1.0 - 1e-4)] {
        let (lo1, hi1) = if near < far { (near, mid) } else { (mid, near) };
        let (lo2, hi2) = if near < far { (mid, far) } else { (far, mid) };
        let inner = adaptive(integrand.as_ref(), lo1, hi1, QUAD_TOL, MAX_DEPTH)?;
        let outer = adaptive(integrand.as_ref(), lo2, hi2, QUAD_TOL, MAX_DEPTH)?;
        if inner > 0.5 * outer && inner > 1e-9 {
            return Err(Error::Quadrature("profile is not q-integrable (endpoint singularity)".into()));
        }
    }
    adaptive(integrand.as_ref(), 0.0, 1.0, QUAD_TOL, MAX_DEPTH)?;
    let cum = move |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            adaptive(integrand.as_ref(), 0.0, t, QUAD_TOL, MAX_DEPTH).unwrap_or(f64::NAN)
        }
    };
    Ok(ControlFn::new(move |s, t| (cum(t) - cum(s)).max(0.0), format!("int g^{q}")))
}
