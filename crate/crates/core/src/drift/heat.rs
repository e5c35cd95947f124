use std::num::NonZeroUsize;
use std::sync::{Arc, OnceLock};

use gauss_quad::hermite::GaussHermite;

use super::fields::{phase, SpatialField, TrigSeries, TrigTerm};
use super::{DriftField, TimeProfile};
use crate::error::{invalid, Error, Result};

const HERMITE_POINTS: usize = 64;

/// Standard-normal quadrature `(z_i, p_i)` with `sum p_i f(z_i) ~ E f(Z)`.
fn normal_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let gh = GaussHermite::new(NonZeroUsize::new(HERMITE_POINTS).unwrap());
        let norm = std::f64::consts::PI.sqrt();
        gh.as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / norm))
            .collect()
    })
}

/// `P_tau g(x) = E g(x + sqrt(tau) Z)` by tensor Gauss-Hermite quadrature.
#[derive(Debug, Clone)]
pub struct HeatSmoothed {
    inner: Arc<dyn SpatialField>,
    tau: f64,
}

impl HeatSmoothed {
    pub fn new(inner: Arc<dyn SpatialField>, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!("smoothing time must be positive, got {tau}")));
        }
        if inner.dim() > 2 {
            return Err(invalid("quadrature smoothing supports d <= 2; supply a closed-form smoothing"));
        }
        Ok(Self { inner, tau })
    }

    /// Visit every quadrature node as `(weight, z)`.
    fn for_nodes(&self, mut f: impl FnMut(f64, &[f64])) {
        let rule = normal_rule();
        match self.inner.dim() {
            1 => {
                for &(z, p) in rule {
                    f(p, &[z]);
                }
            }
            _ => {
                for &(z0, p0) in rule {
                    for &(z1, p1) in rule {
                        f(p0 * p1, &[z0, z1]);
                    }
                }
            }
        }
    }
}

impl SpatialField for HeatSmoothed {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let sd = self.tau.sqrt();
        let mut y = vec![0.0; d];
        let mut g = vec![0.0; d];
        out.fill(0.0);
        self.for_nodes(|p, z| {
            for k in 0..d {
                y[k] = x[k] + sd * z[k];
            }
            self.inner.eval(&y, &mut g);
            for k in 0..d {
                out[k] += p * g[k];
            }
        });
    }

    fn name(&self) -> String {
        format!("P[{}]({})", self.tau, self.inner.name())
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        // d/dx_j E g(x + s Z) = E[g(x + s Z) Z_j] / s
        let d = self.dim();
        let sd = self.tau.sqrt();
        let mut y = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut jac = vec![0.0; d * d];
        self.for_nodes(|p, z| {
            for k in 0..d {
                y[k] = x[k] + sd * z[k];
            }
            self.inner.eval(&y, &mut g);
            for i in 0..d {
                for j in 0..d {
                    jac[i * d + j] += p * g[i] * z[j] / sd;
                }
            }
        });
        Some(jac)
    }
}

/// `P_tau b` with unchanged time profile and metadata.
pub fn heat_smooth(b: &DriftField, tau: f64) -> Result<DriftField> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("smoothing time must be positive, got {tau}")));
    }
    let spatial = match b.spatial().smoothed(tau) {
        Some(s) => s,
        None => Arc::new(HeatSmoothed::new(Arc::clone(b.spatial()), tau)?) as Arc<dyn SpatialField>,
    };
    let d = spatial.dim();
    let mut out = vec![0.0; d];
    for probe in [-10.0, -1.0, 0.0, 0.5, 10.0] {
        spatial.eval(&vec![probe; d], &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature(format!("smoothing of {} is not finite at {probe}", b.name())));
        }
    }
    DriftField::new(spatial, b.profile().clone(), b.alpha(), b.q())
}

/// One smoothed drift per level; levels must be strictly decreasing.
pub fn mollify_sequence(b: &DriftField, levels: &[f64]) -> Result<Vec<DriftField>> {
    check_levels(levels)?;
    levels.iter().map(|&tau| heat_smooth(b, tau)).collect()
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(invalid("need at least one smoothing level"));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) || levels.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid("smoothing levels must be positive and strictly decreasing"));
    }
    Ok(())
}

/// `sup_tau tau^(-beta/2) sup_x |P_tau f(x)|` over the given scales and
/// lattice: the heat-semigroup characterisation of the `C^beta` norm for
/// `beta < 0`.
pub fn negative_norm_estimate(field: &Arc<dyn SpatialField>, beta: f64, lattice: &[f64], taus: &[f64]) -> Result<f64> {
    if beta >= 0.0 {
        return Err(invalid("negative norm estimate needs beta < 0"));
    }
    let d = field.dim();
    let mut best = 0.0_f64;
    let mut out = vec![0.0; d];
    for &tau in taus {
        let smooth = match field.smoothed(tau) {
            Some(s) => s,
            None => Arc::new(HeatSmoothed::new(Arc::clone(field), tau)?),
        };
        let mut sup = 0.0_f64;
        for &x in lattice {
            smooth.eval(&vec![x; d], &mut out);
            sup = out.iter().fold(sup, |m, v| m.max(v.abs()));
        }
        best = best.max(tau.powf(-beta / 2.0) * sup);
    }
    Ok(best)
}

/// Lacunary series `A sum_{k >= k0} lambda^{-k alpha} cos(lambda^k x + phi_k)`
/// with `alpha` possibly negative. It is never evaluated pointwise; only its
/// heat-smoothed versions are.
#[derive(Debug, Clone)]
pub struct LacunaryDistribution {
    pub alpha: f64,
    pub lambda: f64,
    pub k_min: i32,
    pub amplitude: f64,
    pub profile: TimeProfile,
    pub q: f64,
}

impl LacunaryDistribution {
    pub fn new(alpha: f64, lambda: f64, k_min: i32, amplitude: f64, profile: TimeProfile, q: f64) -> Result<Self> {
        if !(lambda > 1.0) {
            return Err(invalid("lacunarity lambda must exceed 1"));
        }
        if !(alpha < 1.0) {
            return Err(invalid("alpha must be below 1"));
        }
        Ok(Self { alpha, lambda, k_min, amplitude, profile, q })
    }

    /// Coefficients of `P_tau` of the series, truncated once the heat factor
    /// drops below `e^-45`.
    pub fn smoothed_series(&self, tau: f64) -> TrigSeries {
        let mut terms = Vec::new();
        let mut k = self.k_min;
        loop {
            let w = self.lambda.powi(k);
            let damp = 0.5 * w * w * tau;
            if damp > 45.0 {
                break;
            }
            terms.push(TrigTerm {
                amplitude: self.amplitude * w.powf(-self.alpha) * (-damp).exp(),
                frequency: w,
                phase: phase(k),
            });
            k += 1;
        }
        TrigSeries { terms }
    }

    /// Smooth drift at scale `tau`; its declared norm is the lacunary norm.
    pub fn mollify(&self, tau: f64) -> Result<DriftField> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!("smoothing time must be positive, got {tau}")));
        }
        let series = self.smoothed_series(tau);
        let norm = series.lacunary_norm(self.alpha);
        let mut field = DriftField::new(Arc::new(series), self.profile.clone(), self.alpha, self.q)?;
        field.spatial_norm = norm;
        Ok(field)
    }

    pub fn mollify_sequence(&self, levels: &[f64]) -> Result<Vec<DriftField>> {
        check_levels(levels)?;
        levels.iter().map(|&t| self.mollify(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::fields::{Constant, Linear, SignPower};

    fn eval1(f: &dyn SpatialField, x: f64) -> f64 {
        let mut o = [0.0];
        f.eval(&[x], &mut o);
        o[0]
    }

    #[test]
    fn constant_and_linear_fields_are_fixed_points() {
        for tau in [0.01, 0.5, 3.0] {
            let c = HeatSmoothed::new(Arc::new(Constant { value: vec![2.5] }), tau).unwrap();
            let l = HeatSmoothed::new(Arc::new(Linear::scalar(1.0)), tau).unwrap();
            for x in [-3.0, 0.0, 0.7] {
                assert!((eval1(&c, x) - 2.5).abs() < 1e-12);
                assert!((eval1(&l, x) - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_matches_closed_form_for_trig() {
        let s = TrigSeries::sine(1.0, 2.0);
        let tau = 0.3;
        let q = HeatSmoothed::new(Arc::new(s.clone()), tau).unwrap();
        let exact = s.smoothed(tau).unwrap();
        for x in [-1.0, 0.1, 2.0] {
            assert!((eval1(&q, x) - eval1(exact.as_ref(), x)).abs() < 1e-8);
            let gq = q.gradient(&[x]).unwrap()[0];
            let ge = exact.gradient(&[x]).unwrap()[0];
            assert!((gq - ge).abs() < 1e-8);
        }
    }

    #[test]
    fn semigroup_property() {
        let smooth: Arc<dyn SpatialField> = Arc::new(crate::drift::weierstrass(0.5, 2.0, 0, 3, 1.0));
        let kink: Arc<dyn SpatialField> = Arc::new(SignPower { alpha: 0.5, cap: 10.0, dim: 1 });
        // the Gauss-Hermite rule resolves the kink of |x|^(1/2) only to a few 1e-3
        for (f, tol) in [(smooth, 1e-8), (kink, 5e-3)] {
            let a = HeatSmoothed::new(Arc::clone(&f), 0.2).unwrap();
            let ab = HeatSmoothed::new(Arc::new(a), 0.1).unwrap();
            let direct = HeatSmoothed::new(f, 0.3).unwrap();
            for x in [-1.0, -0.2, 0.0, 0.4, 1.5] {
                let err = (eval1(&ab, x) - eval1(&direct, x)).abs();
                assert!(err < tol, "x={x} err={err:e}");
            }
        }
    }

    #[test]
    fn smoothing_gradient_scaling() {
        // ||grad P_tau b||_inf ~ tau^((alpha-1)/2) for b = sign|x|^alpha
        let b: Arc<dyn SpatialField> = Arc::new(SignPower { alpha: 0.5, cap: 10.0, dim: 1 });
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        for k in 4..=12 {
            let tau = 2f64.powi(-k);
            let p = HeatSmoothed::new(Arc::clone(&b), tau).unwrap();
            let sup = (-32..=32)
                .map(|i| p.gradient(&[f64::from(i) * tau.sqrt() / 8.0]).unwrap()[0].abs())
                .fold(0.0, f64::max);
            lx.push(tau.ln());
            ly.push(sup.ln());
        }
        let fit = crate::stats::ScalingFit::linear(&lx, &ly).unwrap();
        assert!((fit.slope + 0.25).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn mollified_levels_converge_to_smooth_field_at_order_one() {
        let b = DriftField::autonomous(Arc::new(TrigSeries::sine(1.0, 1.5)), 1.0);
        let levels: Vec<f64> = (2..8).map(|k| 2f64.powi(-k)).collect();
        let seq = mollify_sequence(&b, &levels).unwrap();
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        for (tau, m) in levels.iter().zip(&seq) {
            let err = (-100..=100)
                .map(|i| {
                    let x = f64::from(i) / 20.0;
                    (eval1(m.spatial().as_ref(), x) - eval1(b.spatial().as_ref(), x)).abs()
                })
                .fold(0.0, f64::max);
            lx.push(tau.ln());
            ly.push(err.ln());
        }
        let fit = crate::stats::ScalingFit::linear(&lx, &ly).unwrap();
        assert!(fit.slope >= 0.9, "order {}", fit.slope);
        assert!(mollify_sequence(&b, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn lacunary_levels_have_nonincreasing_norms() {
        let d = LacunaryDistribution::new(-0.1, 2.0, 0, 1.0, TimeProfile::Constant(1.0), 2.0).unwrap();
        let seq = d.mollify_sequence(&[0.1, 0.01, 0.001, 1e-4]).unwrap();
        let lattice: Vec<f64> = (-200..=200).map(|i| f64::from(i) / 100.0).collect();
        let taus: Vec<f64> = (0..14).map(|k| 2f64.powi(-k)).collect();
        let mut prev = f64::INFINITY;
        for m in &seq {
            assert!(m.spatial_norm() <= prev * 1.1);
            prev = m.spatial_norm();
            let est = negative_norm_estimate(m.spatial(), -0.1, &lattice, &taus).unwrap();
            assert!(est.is_finite() && est > 0.0);
        }
    }

    #[test]
    fn negative_norm_of_constant_is_its_size() {
        let c: Arc<dyn SpatialField> = Arc::new(Constant { value: vec![-0.25] });
        let taus: Vec<f64> = (0..10).map(|k| 2f64.powi(-k)).collect();
        let est = negative_norm_estimate(&c, -0.5, &[0.0, 1.0], &taus).unwrap();
        assert!((est - 0.25).abs() < 1e-15);
    }
}
