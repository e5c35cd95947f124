use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Classification of `(H, q, alpha)` against the scaling threshold
/// `1 - 1/(q' H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub hurst: f64,
    pub q: f64,
    pub alpha: f64,
    pub q_conjugate: f64,
    pub threshold: f64,
    /// `1 - H - 1/q + alpha H`.
    pub scaling_exponent: f64,
    pub regime: Regime,
    /// `q in (1,2]` and `threshold < alpha < 1`.
    pub condition_a: bool,
    /// `alpha > 1/2 - 1/(2H)` and `alpha > threshold`.
    pub condition_b: bool,
}

/// `q' = q/(q-1)`, with `q' = 1` for `q = inf`.
pub fn conjugate(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

pub fn classify_regime(hurst: f64, q: f64, alpha: f64) -> Result<RegimeReport> {
    if !(hurst > 0.0) || !hurst.is_finite() || hurst.fract() == 0.0 {
        return Err(invalid(format!("H must be positive and non-integer, got {hurst}")));
    }
    if !(q > 1.0) {
        return Err(invalid(format!("q must lie in (1, inf], got {q}")));
    }
    if !alpha.is_finite() {
        return Err(invalid("alpha must be finite"));
    }
    let qc = conjugate(q);
    let threshold = 1.0 - 1.0 / (qc * hurst);
    let gap = alpha - threshold;
    let regime = if gap.abs() <= 1e-12 {
        Regime::Critical
    } else if gap > 0.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    };
    let strict = regime == Regime::Subcritical;
    let condition_a = q <= 2.0 && strict && alpha < 1.0;
    let condition_b = alpha > 0.5 - 0.5 / hurst && strict;
    let inv_q = if q.is_finite() { 1.0 / q } else { 0.0 };
    Ok(RegimeReport {
        hurst,
        q,
        alpha,
        q_conjugate: qc,
        threshold,
        scaling_exponent: 1.0 - hurst - inv_q + alpha * hurst,
        regime,
        condition_a,
        condition_b,
    })
}

impl RegimeReport {
    /// Error naming the first violated inequality of the strict condition.
    pub fn require_subcritical(&self) -> Result<()> {
        if self.regime != Regime::Subcritical {
            return Err(Error::Regime(format!(
                "alpha = {} must exceed 1 - 1/(q' H) = {:.6} (H = {}, q = {})",
                self.alpha, self.threshold, self.hurst, self.q
            )));
        }
        Ok(())
    }

    pub fn require_condition_a(&self) -> Result<()> {
        self.require_subcritical()?;
        if !(self.q <= 2.0) {
            return Err(Error::Regime(format!("q = {} must lie in (1, 2]", self.q)));
        }
        if !(self.alpha < 1.0) {
            return Err(Error::Regime(format!("alpha = {} must be below 1", self.alpha)));
        }
        Ok(())
    }

    pub fn require_a_or_b(&self) -> Result<()> {
        if self.condition_a || self.condition_b {
            return Ok(());
        }
        self.require_subcritical()?;
        Err(Error::Regime(format!(
            "need q <= 2 (got {}) or alpha = {} > 1/2 - 1/(2H) = {:.6}",
            self.q,
            self.alpha,
            0.5 - 0.5 / self.hurst
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let r = classify_regime(0.5, 2.0, 0.1).unwrap();
        assert!(r.threshold.abs() < 1e-15);
        assert_eq!(r.regime, Regime::Subcritical);
        assert!(r.condition_a);
        assert_eq!(classify_regime(0.5, 2.0, 0.0).unwrap().regime, Regime::Critical);
        let r = classify_regime(2.5, 2.0, 0.8).unwrap();
        assert!((r.threshold - 0.8).abs() < 1e-12);
        let r = classify_regime(0.3, 2.0, -0.1).unwrap();
        assert!(r.condition_a);
        assert!(classify_regime(2.0, 2.0, 0.8).is_err());
        assert!(classify_regime(0.5, 1.0, 0.8).is_err());
        let r = classify_regime(0.8, 4.0, 0.05).unwrap();
        assert_eq!(r.regime, Regime::Supercritical);
        assert!((r.threshold - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn violation_names_the_inequality() {
        let err = classify_regime(0.5, 2.0, -0.5).unwrap().require_subcritical().unwrap_err();
        assert!(err.to_string().contains("1 - 1/(q' H)"));
    }

    proptest! {
        #[test]
        fn monotone_in_alpha(h in 0.05..1.95f64, q in 1.05..20.0f64, a in -2.0..1.0f64, da in 0.0..1.0f64) {
            prop_assume!((h - 1.0).abs() > 1e-3);
            let lo = classify_regime(h, q, a).unwrap();
            let hi = classify_regime(h, q, a + da).unwrap();
            prop_assert!(!(lo.regime == Regime::Subcritical && hi.regime == Regime::Supercritical));
        }
    }
}
