use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{norm, DiscretePath};
use crate::error::{invalid, Error, Result};
use crate::fbm::TimeGrid;
use crate::stats::ScalingFit;

/// Two-parameter germ `A_{s,t}` in continuous time, with `A_{s,s} = 0`.
pub trait Germ: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, s: f64, t: f64, out: &mut [f64]);
    /// Exponent `eps` such that level deltas should decay like `2^{-k eps}`.
    fn claimed_exponent(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SewOptions {
    pub max_level: u32,
    pub tolerance: f64,
    /// Add the geometric tail estimated from the last two levels.
    pub extrapolate: bool,
}

impl Default for SewOptions {
    fn default() -> Self {
        Self { max_level: 14, tolerance: 1e-9, extrapolate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SewingDiagnostics {
    /// `|S_{k+1} - S_k|` for the dyadic Riemann sums `S_k` with `2^k` pieces.
    pub level_deltas: Vec<f64>,
    /// `-slope` of `log2(delta_k)` against `k`, when at least two deltas are positive.
    pub fitted_rate: Option<f64>,
    pub converged: bool,
    /// Deltas shrink; false flags a germ violating the coherence condition.
    pub decaying: bool,
    pub extrapolated: bool,
}

const CHUNK: usize = 1024;

fn riemann_sum(germ: &dyn Germ, a: f64, b: f64, pieces: usize) -> Vec<f64> {
    let d = germ.dim();
    let h = (b - a) / pieces as f64;
    let node = |j: usize| if j == pieces { b } else { a + j as f64 * h };
    let partial = |lo: usize, hi: usize| {
        let mut acc = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        for j in lo..hi {
            germ.eval(node(j), node(j + 1), &mut tmp);
            for (x, y) in acc.iter_mut().zip(&tmp) {
                *x += y;
            }
        }
        acc
    };
    if pieces <= CHUNK {
        return partial(0, pieces);
    }
    let chunks: Vec<Vec<f64>> = (0..pieces.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| partial(c * CHUNK, ((c + 1) * CHUNK).min(pieces)))
        .collect();
    // fixed summation order keeps results reproducible
    let mut acc = vec![0.0; d];
    for c in chunks {
        for (x, y) in acc.iter_mut().zip(c) {
            *x += y;
        }
    }
    acc
}

fn decay_fit(deltas: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        deltas.iter().enumerate().filter(|(_, d)| **d > 0.0).map(|(k, d)| (k as f64, d.log2())).collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    ScalingFit::linear(&x, &y).ok().map(|f| -f.slope)
}

/// Sew `germ` over `[t_s, t_t]` by dyadic Riemann sums.
pub fn sew(germ: &dyn Germ, grid: TimeGrid, s: usize, t: usize, opts: SewOptions) -> Result<(Vec<f64>, SewingDiagnostics)> {
    if s > t || t > grid.n_steps() {
        return Err(invalid(format!("bad sewing interval {s}..{t}")));
    }
    let (a, b) = (grid.node(s), grid.node(t));
    let mut prev = riemann_sum(germ, a, b, 1);
    let mut prev2: Option<Vec<f64>> = None;
    let mut deltas = Vec::new();
    let mut converged = false;
    for k in 1..=opts.max_level {
        let next = riemann_sum(germ, a, b, 1usize << k);
        let delta = norm(&next.iter().zip(&prev).map(|(x, y)| x - y).collect::<Vec<_>>());
        deltas.push(delta);
        prev2 = Some(std::mem::replace(&mut prev, next));
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    let rate = decay_fit(&deltas);
    let decaying = converged || rate.is_some_and(|r| r > 0.05);
    let mut value = prev.clone();
    let mut extrapolated = false;
    if !converged && opts.extrapolate && decaying {
        // geometric tail from the ratio of the last two deltas
        let k = deltas.len();
        if let (true, Some(p2)) = (k >= 2, prev2) {
            let ratio = deltas[k - 1] / deltas[k - 2];
            if ratio > 0.0 && ratio < 1.0 {
                for ((v, x), y) in value.iter_mut().zip(&prev).zip(&p2) {
                    *v += (x - y) * ratio / (1.0 - ratio);
                }
                extrapolated = true;
            }
        }
    }
    let diag = SewingDiagnostics { level_deltas: deltas, fitted_rate: rate, converged: converged || decaying, decaying, extrapolated };
    Ok((value, diag))
}

/// Riemann sums over grid-aligned near-dyadic partitions of `[s, t]`,
/// finest level being the grid itself. Returns level deltas.
fn grid_level_deltas(eval: &dyn Fn(usize, usize) -> Vec<f64>, s: usize, t: usize) -> Vec<f64> {
    let steps = t - s;
    let levels = usize::BITS - steps.leading_zeros();
    let sum_at = |pieces: usize| -> Vec<f64> {
        let pts: Vec<usize> = (0..=pieces).map(|j| s + (j * steps) / pieces).collect();
        let mut acc: Vec<f64> = Vec::new();
        for w in pts.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let v = eval(w[0], w[1]);
            if acc.is_empty() {
                acc = v;
            } else {
                for (x, y) in acc.iter_mut().zip(v) {
                    *x += y;
                }
            }
        }
        acc
    };
    let mut deltas = Vec::new();
    let mut prev = sum_at(1);
    for k in 1..levels {
        let pieces = (1usize << k).min(steps);
        let next = sum_at(pieces);
        deltas.push(norm(&next.iter().zip(&prev).map(|(x, y)| x - y).collect::<Vec<_>>()));
        prev = next;
        if pieces == steps {
            break;
        }
    }
    deltas
}

/// `t -> int_0^t f dg` on the grid of `g`.
///
/// The germ is `f_s g_{s,t} + (1/2) f_{s,t} g_{s,t}`: it differs from
/// `f_s g_{s,t}` by a term of order `|t-s|^{1/p + 1/p~} = o(|t-s|)`, so both
/// sew to the same integral, but this one is exact for the product rule at
/// grid resolution. `f` is either scalar or of the same dimension as `g`
/// (componentwise integrals).
pub fn young_integral(f: &DiscretePath, g: &DiscretePath, p: f64, p_tilde: f64) -> Result<DiscretePath> {
    if !(p >= 1.0 && p_tilde >= 1.0) || 1.0 / p + 1.0 / p_tilde <= 1.0 {
        return Err(invalid(format!("Young integral needs 1/p + 1/p~ > 1, got p={p}, p~={p_tilde}")));
    }
    if f.len() != g.len() {
        return Err(Error::Dimension("integrand and integrator live on different grids".into()));
    }
    if f.dim() != 1 && f.dim() != g.dim() {
        return Err(Error::Dimension("integrand must be scalar or match the integrator".into()));
    }
    let d = g.dim();
    let germ = |s: usize, t: usize| -> Vec<f64> {
        (0..d)
            .map(|c| {
                let fc = if f.dim() == 1 { 0 } else { c };
                0.5 * (f.at(s)[fc] + f.at(t)[fc]) * (g.at(t)[c] - g.at(s)[c])
            })
            .collect()
    };
    let n = g.len() - 1;
    if n >= 4 {
        let deltas = grid_level_deltas(&germ, 0, n);
        let largest = deltas.iter().cloned().fold(0.0, f64::max);
        let size = 1.0 + norm(&germ(0, n));
        // deltas at rounding level carry no information
        if largest > 1e-12 * size {
            if let Some(rate) = decay_fit(&deltas) {
                if rate < -0.05 {
                    return Err(Error::Sewing(format!("Riemann-sum deltas grow (fitted rate {rate:.3})")));
                }
            }
        }
    }
    let mut acc = vec![0.0; d];
    let mut out = vec![acc.clone()];
    for i in 0..n {
        for (a, v) in acc.iter_mut().zip(germ(i, i + 1)) {
            *a += v;
        }
        out.push(acc.clone());
    }
    DiscretePath::new(g.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::sample_fbm;

    struct Additive;
    impl Germ for Additive {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
            out[0] = t.sin() - s.sin();
        }
    }

    struct Riemann;
    impl Germ for Riemann {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
            out[0] = s.cos() * (t * t - s * s);
        }
        fn claimed_exponent(&self) -> Option<f64> {
            Some(1.0)
        }
    }

    struct Rough;
    impl Germ for Rough {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
            out[0] = (t - s).sqrt();
        }
    }

    #[test]
    fn additive_germ_is_exact_at_level_zero() {
        let g = TimeGrid::unit(16).unwrap();
        let (v, d) = sew(&Additive, g, 0, 16, SewOptions::default()).unwrap();
        assert!((v[0] - 1f64.sin()).abs() < 1e-15);
        assert!(d.level_deltas.iter().all(|&x| x < 1e-15));
        assert!(d.converged);
    }

    #[test]
    fn smooth_germ_converges_to_integral() {
        // int_0^1 cos(t) d(t^2) = 2 (cos 1 + sin 1) - 2
        let exact = 2.0 * (1f64.cos() + 1f64.sin()) - 2.0;
        let g = TimeGrid::unit(1024).unwrap();
        let (v, d) = sew(&Riemann, g, 0, 1024, SewOptions::default()).unwrap();
        assert!((v[0] - exact).abs() < 1e-7, "{}", v[0] - exact);
        let rate = d.fitted_rate.unwrap();
        assert!((rate - 1.0).abs() < 0.1);
    }

    #[test]
    fn incoherent_germ_is_flagged() {
        let g = TimeGrid::unit(8).unwrap();
        let (_, d) = sew(&Rough, g, 0, 8, SewOptions { max_level: 10, ..Default::default() }).unwrap();
        assert!(!d.decaying);
        assert!(!d.converged);
    }

    #[test]
    fn young_integral_examples() {
        let g = TimeGrid::unit(2048).unwrap();
        let f = DiscretePath::from_fn(g, |t| vec![t]).unwrap();
        let h = DiscretePath::from_fn(g, |t| vec![t * t]).unwrap();
        let i = young_integral(&f, &h, 1.0, 1.0).unwrap();
        assert!((i.last()[0] - 2.0 / 3.0).abs() < 1e-6);
        let s = DiscretePath::from_fn(g, |t| vec![(3.0 * t).sin()]).unwrap();
        let i = young_integral(&s, &s, 1.0, 1.0).unwrap();
        let want = 0.5 * (3f64.sin().powi(2));
        assert!((i.last()[0] - want).abs() < 1e-12);
        assert!(young_integral(&f, &h, 2.0, 2.0).is_err());
    }

    #[test]
    fn integration_by_parts_for_fbm() {
        let g = TimeGrid::unit(1024).unwrap();
        let a = DiscretePath::from_fbm(&sample_fbm(0.7, g, 1, 1).unwrap());
        let b = DiscretePath::from_fbm(&sample_fbm(0.7, g, 1, 2).unwrap());
        let p = 1.0 / 0.65;
        let ab = young_integral(&a, &b, p, p).unwrap();
        let ba = young_integral(&b, &a, p, p).unwrap();
        let resid = ab.last()[0] + ba.last()[0] - a.last()[0] * b.last()[0];
        assert!(resid.abs() < 1e-4);
    }
}
