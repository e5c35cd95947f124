use serde::{Deserialize, Serialize};

/// Time factor `theta(t)` of a separable drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeProfile {
    Constant(f64),
    /// `scale * (t - origin)^(-exponent)` for `t > origin`, zero before.
    Power { scale: f64, origin: f64, exponent: f64 },
}

/// `x^c - y^c` for `x, y > 0` (or `y = 0`) without cancellation.
fn pow_diff(x: f64, y: f64, c: f64) -> f64 {
    if y <= 0.0 {
        return x.powf(c);
    }
    y.powf(c) * (c * ((x - y) / y).ln_1p()).exp_m1()
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant(c) => c,
            TimeProfile::Power { scale, origin, exponent } => {
                if t > origin {
                    scale * (t - origin).powf(-exponent)
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact `int_a^b |theta|^p dr` (infinite if not integrable).
    pub fn power_integral(&self, p: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match *self {
            TimeProfile::Constant(c) => c.abs().powf(p) * (b - a),
            TimeProfile::Power { scale, origin, exponent } => {
                if b <= origin {
                    return 0.0;
                }
                let lo = a.max(origin) - origin;
                let hi = b - origin;
                let e = 1.0 - p * exponent;
                if e <= 0.0 && lo <= 0.0 {
                    return f64::INFINITY;
                }
                if e == 0.0 {
                    return scale.abs().powf(p) * (hi / lo).ln();
                }
                scale.abs().powf(p) * pow_diff(hi, lo, e) / e
            }
        }
    }

    /// Exact `int_a^b theta(r) dr`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            TimeProfile::Constant(c) => c * (b - a),
            TimeProfile::Power { scale, .. } => scale.signum() * self.power_integral(1.0, a, b),
        }
    }

    /// Exact `int_a^b theta(r) (r - a) dr`.
    pub fn first_moment(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match *self {
            TimeProfile::Constant(c) => 0.5 * c * (b - a) * (b - a),
            TimeProfile::Power { scale, origin, exponent } => {
                if b <= origin {
                    return 0.0;
                }
                let lo = a.max(origin) - origin;
                let hi = b - origin;
                // int (r-o) theta + (o-a) int theta
                let m1 = scale * pow_diff(hi, lo, 2.0 - exponent) / (2.0 - exponent);
                m1 + (origin - a) * self.integral(a, b)
            }
        }
    }

    pub fn is_q_integrable(&self, q: f64) -> bool {
        match *self {
            TimeProfile::Constant(c) => c.is_finite(),
            TimeProfile::Power { scale, origin, exponent } => {
                let finite = scale.is_finite() && origin.is_finite() && exponent.is_finite() && exponent >= 0.0;
                finite && (exponent == 0.0 || origin >= 1.0 || q * exponent < 1.0)
            }
        }
    }

    /// `sup_{[a,b]} |theta|`.
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        match *self {
            TimeProfile::Constant(c) => c.abs(),
            TimeProfile::Power { scale, origin, exponent } => {
                if b <= origin {
                    0.0
                } else if exponent > 0.0 {
                    if a > origin {
                        scale.abs() * (a - origin).powf(-exponent)
                    } else {
                        f64::INFINITY
                    }
                } else {
                    scale.abs()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // integrates f over offsets s = r - origin in [lo, hi]; s = lo + (hi - lo) u^5
    // flattens a singularity at lo, and working in offsets keeps it exact
    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let g = |u: f64| {
            let s = lo + (hi - lo) * u.powi(5);
            if s == 0.0 {
                0.0
            } else {
                f(s) * 5.0 * u.powi(4) * (hi - lo)
            }
        };
        quadrature::double_exponential::integrate(g, 0.0, 1.0, 1e-13).integral
    }

    #[test]
    fn exact_moments_match_quadrature() {
        let p = TimeProfile::Power { scale: 0.7, origin: 0.25, exponent: 0.4 };
        let th = |s: f64| 0.7 * s.powf(-0.4);
        for &(a, b) in &[(0.25, 0.5), (0.25, 0.26), (0.3, 0.9), (0.25, 1.0)] {
            let (lo, hi) = (a - 0.25, b - 0.25);
            assert!((p.integral(a, b) - quad(th, lo, hi)).abs() < 1e-12, "{a} {b}");
            let fm = p.first_moment(a, b) - quad(|s| th(s) * (s - lo), lo, hi);
            assert!(fm.abs() < 1e-12, "{a} {b} {fm:e}");
            assert!((p.power_integral(2.0, a, b) - quad(|s| th(s).powi(2), lo, hi)).abs() < 1e-11);
        }
        // zero before the origin
        assert_eq!(p.integral(0.0, 0.2), 0.0);
        assert!((p.integral(0.0, 0.5) - p.integral(0.25, 0.5)).abs() < 1e-15);
        let m = p.first_moment(0.0, 0.5) - p.first_moment(0.25, 0.5) - 0.25 * p.integral(0.25, 0.5);
        assert!(m.abs() < 1e-14);
    }

    #[test]
    fn tiny_steps_far_from_origin_keep_precision() {
        let p = TimeProfile::Power { scale: 1.0, origin: 0.0, exponent: 0.25 };
        let (a, b) = (0.9, 0.9 + 1e-7);
        let want = (b - a) * p.value(0.5 * (a + b));
        assert!(((p.integral(a, b) - want) / want).abs() < 1e-12);
    }

    #[test]
    fn integrability() {
        let p = TimeProfile::Power { scale: 1.0, origin: 0.0, exponent: 0.5 };
        assert!(p.is_q_integrable(1.9));
        assert!(!p.is_q_integrable(2.0));
        assert!(p.power_integral(2.0, 0.0, 1.0).is_infinite());
        assert!(TimeProfile::Constant(2.0).is_q_integrable(f64::INFINITY));
    }
}
