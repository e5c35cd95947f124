use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

/// Time-independent vector field `g: R^d -> R^d`.
pub trait SpatialField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    fn name(&self) -> String;

    /// Row-major Jacobian, `[i*d + j] = d g_i / d x_j`.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn divergence(&self, x: &[f64]) -> Option<f64> {
        let d = self.dim();
        self.gradient(x).map(|g| (0..d).map(|i| g[i * d + i]).sum())
    }

    /// Analytic `||g||_{C^alpha}` (sup norm plus seminorm), when known.
    fn holder_norm(&self, _alpha: f64) -> Option<f64> {
        None
    }

    /// Closed-form heat smoothing `P_tau g`, when available.
    fn smoothed(&self, _tau: f64) -> Option<Arc<dyn SpatialField>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct Zero {
    pub dim: usize,
}

impl SpatialField for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn name(&self) -> String {
        "zero".into()
    }
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim * self.dim])
    }
    fn holder_norm(&self, _alpha: f64) -> Option<f64> {
        Some(0.0)
    }
    fn smoothed(&self, _tau: f64) -> Option<Arc<dyn SpatialField>> {
        Some(Arc::new(self.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct Constant {
    pub value: Vec<f64>,
}

impl SpatialField for Constant {
    fn dim(&self) -> usize {
        self.value.len()
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.value);
    }
    fn name(&self) -> String {
        format!("constant{:?}", self.value)
    }
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim() * self.dim()])
    }
    fn holder_norm(&self, _alpha: f64) -> Option<f64> {
        Some(self.value.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
    fn smoothed(&self, _tau: f64) -> Option<Arc<dyn SpatialField>> {
        Some(Arc::new(self.clone()))
    }
}

/// `x -> A x` with `A` row-major `d x d`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub matrix: Vec<f64>,
    pub dim: usize,
}

impl Linear {
    pub fn scalar(slope: f64) -> Self {
        Self { matrix: vec![slope], dim: 1 }
    }
}

impl SpatialField for Linear {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|j| self.matrix[i * d + j] * x[j]).sum();
        }
    }
    fn name(&self) -> String {
        format!("linear{:?}", self.matrix)
    }
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(self.matrix.clone())
    }
    fn smoothed(&self, _tau: f64) -> Option<Arc<dyn SpatialField>> {
        Some(Arc::new(self.clone()))
    }
}

/// `sign(x) min(|x|, cap)^alpha`; in `d > 1` only the first component is
/// nonzero, `sign(x_1) min(|x|, cap)^alpha`.
#[derive(Debug, Clone)]
pub struct SignPower {
    pub alpha: f64,
    pub cap: f64,
    pub dim: usize,
}

impl SpatialField for SignPower {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let r = if self.dim == 1 { x[0].abs() } else { x.iter().map(|v| v * v).sum::<f64>().sqrt() };
        let v = r.min(self.cap).powf(self.alpha);
        out[0] = if x[0] > 0.0 {
            v
        } else if x[0] < 0.0 {
            -v
        } else {
            0.0
        };
    }
    fn name(&self) -> String {
        format!("sign-power(alpha={})", self.alpha)
    }
    fn holder_norm(&self, alpha: f64) -> Option<f64> {
        // sup is cap^a; the seminorm of sign|x|^a is attained at (x, -x).
        (self.dim == 1 && (alpha - self.alpha).abs() < 1e-15)
            .then(|| self.cap.powf(self.alpha) + 2f64.powf(1.0 - self.alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Scalar trigonometric series `sum_k a_k cos(w_k x + phi_k)`.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    /// `amplitude * sin(frequency * x)`.
    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self { terms: vec![TrigTerm { amplitude, frequency, phase: -FRAC_PI_2 }] }
    }

    /// `sup_k w_k^beta |a_k|`, the natural norm for lacunary series.
    pub fn lacunary_norm(&self, beta: f64) -> f64 {
        self.terms.iter().map(|t| t.frequency.powf(beta) * t.amplitude.abs()).fold(0.0, f64::max)
    }
}

impl SpatialField for TrigSeries {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.terms.iter().map(|t| t.amplitude * (t.frequency * x[0] + t.phase).cos()).sum();
    }
    fn name(&self) -> String {
        format!("trig-series({} terms)", self.terms.len())
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self
            .terms
            .iter()
            .map(|t| -t.amplitude * t.frequency * (t.frequency * x[0] + t.phase).sin())
            .sum()])
    }
    fn holder_norm(&self, alpha: f64) -> Option<f64> {
        // |cos a - cos b| <= min(2, w|x-y|) <= 2^(1-alpha) w^alpha |x-y|^alpha
        (alpha > 0.0).then(|| {
            self.terms
                .iter()
                .map(|t| t.amplitude.abs() * (1.0 + 2f64.powf(1.0 - alpha) * t.frequency.powf(alpha)))
                .sum()
        })
    }
    fn smoothed(&self, tau: f64) -> Option<Arc<dyn SpatialField>> {
        let terms = self
            .terms
            .iter()
            .map(|t| TrigTerm { amplitude: t.amplitude * (-0.5 * t.frequency * t.frequency * tau).exp(), ..*t })
            .filter(|t| t.amplitude != 0.0)
            .collect();
        Some(Arc::new(TrigSeries { terms }))
    }
}

/// Lacunary phase sequence; fixed so fields are reproducible.
pub(crate) fn phase(k: i32) -> f64 {
    (f64::from(k) * 2.399_963_229_728_653).rem_euclid(std::f64::consts::TAU)
}

/// Truncated Weierstrass-type series `A sum_{k=k0}^{k1} lambda^{-k alpha} cos(lambda^k x + phi_k)`,
/// exactly `C^alpha` uniformly in the truncation.
pub fn weierstrass(alpha: f64, lambda: f64, k_min: i32, k_max: i32, amplitude: f64) -> TrigSeries {
    let terms = (k_min..=k_max)
        .map(|k| TrigTerm {
            amplitude: amplitude * lambda.powf(-f64::from(k) * alpha),
            frequency: lambda.powi(k),
            phase: phase(k),
        })
        .collect();
    TrigSeries { terms }
}

/// Pointwise sum of two fields.
#[derive(Debug, Clone)]
pub struct SumField {
    pub a: Arc<dyn SpatialField>,
    pub b: Arc<dyn SpatialField>,
}

impl SpatialField for SumField {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.a.eval(x, out);
        let mut tmp = vec![0.0; out.len()];
        self.b.eval(x, &mut tmp);
        for (o, t) in out.iter_mut().zip(tmp) {
            *o += t;
        }
    }
    fn name(&self) -> String {
        format!("{}+{}", self.a.name(), self.b.name())
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let ga = self.a.gradient(x)?;
        let gb = self.b.gradient(x)?;
        Some(ga.into_iter().zip(gb).map(|(u, v)| u + v).collect())
    }
    fn smoothed(&self, tau: f64) -> Option<Arc<dyn SpatialField>> {
        Some(Arc::new(SumField { a: self.a.smoothed(tau)?, b: self.b.smoothed(tau)? }))
    }
}

/// `max_{i<j} |f_i - f_j| / |x_i - x_j|^alpha` over a lattice; a lower bound
/// for the Holder seminorm.
pub fn holder_seminorm_estimate(xs: &[f64], values: &[f64], alpha: f64) -> f64 {
    let n = xs.len().min(values.len());
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = (xs[i] - xs[j]).abs();
            if dx > 0.0 {
                best = best.max((values[i] - values[j]).abs() / dx.powf(alpha));
            }
        }
    }
    best
}

/// Lattice estimate of `||g||_{C^alpha}` on `[-10, 10]` (along the diagonal when `d > 1`).
pub(crate) fn estimate_norm(field: &dyn SpatialField, alpha: f64) -> f64 {
    let d = field.dim();
    let xs: Vec<f64> = (0..=1280).map(|i| -10.0 + f64::from(i) / 64.0).collect();
    let unit = 1.0 / (d as f64).sqrt();
    let mut out = vec![0.0; d];
    let mut comps = vec![Vec::with_capacity(xs.len()); d];
    for &s in &xs {
        let x = vec![s * unit; d];
        field.eval(&x, &mut out);
        for (c, v) in comps.iter_mut().zip(&out) {
            c.push(*v);
        }
    }
    let sup = comps.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if alpha <= 0.0 {
        return sup;
    }
    let semi = comps.iter().map(|c| holder_seminorm_estimate(&xs, c, alpha)).fold(0.0, f64::max);
    sup + semi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seminorm_examples() {
        let xs: Vec<f64> = (0..=100).map(|i| f64::from(i) / 100.0).collect();
        assert!((holder_seminorm_estimate(&xs, &xs, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(holder_seminorm_estimate(&xs, &vec![3.0; 101], 0.5), 0.0);
        let xs: Vec<f64> = (-1024..=1024).map(|i| f64::from(i) / 1024.0).collect();
        let f: Vec<f64> = xs.iter().map(|x| x.abs().sqrt()).collect();
        assert!((holder_seminorm_estimate(&xs, &f, 0.5) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn seminorm_never_decreases_under_refinement() {
        let f = |x: f64| (5.0 * x).sin() + x.abs().powf(0.3);
        let mut prev = 0.0;
        for level in 3..9 {
            let m = 1 << level;
            let xs: Vec<f64> = (-m..=m).map(|i| f64::from(i) / f64::from(m)).collect();
            let v: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            let s = holder_seminorm_estimate(&xs, &v, 0.3);
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn sign_power_norm_matches_lattice() {
        let f = SignPower { alpha: 0.5, cap: 10.0, dim: 1 };
        let analytic = f.holder_norm(0.5).unwrap();
        let est = estimate_norm(&f, 0.5);
        assert!(est <= analytic + 1e-12 && est > 0.99 * analytic);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let fields: Vec<Box<dyn SpatialField>> = vec![
            Box::new(weierstrass(0.4, 2.0, 0, 6, 1.0)),
            Box::new(TrigSeries::sine(0.8, 3.0)),
            Box::new(Linear { matrix: vec![1.0, 2.0, -0.5, 0.3], dim: 2 }),
        ];
        let h = 1e-6;
        for f in &fields {
            let d = f.dim();
            let x: Vec<f64> = (0..d).map(|i| 0.3 + 0.2 * i as f64).collect();
            let g = f.gradient(&x).unwrap();
            for j in 0..d {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
                f.eval(&xp, &mut fp);
                f.eval(&xm, &mut fm);
                for i in 0..d {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    assert!((fd - g[i * d + j]).abs() < 1e-5 * (1.0 + fd.abs()), "{}", f.name());
                }
            }
        }
    }
}
