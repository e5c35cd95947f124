//! Fractional Brownian motion on a uniform grid.
//!
//! Paths are generated as `L z` where `L` is the Cholesky factor of the grid
//! covariance (computed in `O(n^2)` from the Toeplitz structure of the increments) and `z` is i.i.d. standard Gaussian. Keeping `z` around makes
//! exact conditioning on the grid history cheap: the conditional mean of
//! `B_t` given `B_1..B_s` is `sum_{j<=s} L[t,j] z_j` and the conditional
//! variance is `sum_{s<j<=t} L[t,j]^2`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Uniform grid `t_i = i T / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!("grid horizon must be positive, got {horizon}")));
        }
        Ok(Self { n_steps, horizon })
    }

    /// Grid on `[0, 1]`.
    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(n_steps, 1.0)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }
}

pub fn check_hurst(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 2.0 && h != 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidHurst(h))
    }
}

/// Closed-form fBm covariance `(t^2H + s^2H - |t-s|^2H) / 2`, valid for `H in (0,1)`.
pub fn fbm_covariance(h: f64, s: f64, t: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidHurst(h));
    }
    if s < 0.0 || t < 0.0 {
        return Err(invalid("covariance needs nonnegative times"));
    }
    let e = 2.0 * h;
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// Packed rows of the Cholesky factor of the Toeplitz matrix with first
/// column `gamma`, by the Schur algorithm in `O(n^2)`.
fn schur_toeplitz(gamma: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = gamma.len();
    if !(gamma[0] > 0.0) {
        return Err(Error::Factorization { row: 0 });
    }
    let r0 = gamma[0].sqrt();
    let mut g1: Vec<f64> = gamma.iter().map(|v| v / r0).collect();
    let mut g2 = g1.clone();
    g2[0] = 0.0;
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| Vec::with_capacity(i + 1)).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        row.push(g1[i]);
    }
    for k in 1..n {
        g1.copy_within(k - 1..n - 1, k);
        let rho = g2[k] / g1[k];
        if !(rho.abs() < 1.0) {
            return Err(Error::Factorization { row: k });
        }
        let c = 1.0 / ((1.0 - rho) * (1.0 + rho)).sqrt();
        for i in k..n {
            let (a, b) = (g1[i], g2[i]);
            g1[i] = c * (a - rho * b);
            g2[i] = c * (b - rho * a);
            rows[i].push(g1[i]);
        }
    }
    Ok(rows)
}

/// Factor of the values `B_1..B_n` from the factor of the stationary
/// increments: `L_B = S L_inc` with `S` the cumulative sum. `S` is unit lower
/// triangular, so `L_B` is again the Cholesky factor.
fn fbm_rows(hurst: f64, grid: TimeGrid) -> Result<Vec<Vec<f64>>> {
    let n = grid.n_steps();
    let e = 2.0 * hurst;
    let scale = 0.5 * grid.dt().powf(e);
    let gamma: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            scale * ((k + 1.0).powf(e) + (k - 1.0).abs().powf(e) - 2.0 * k.powf(e))
        })
        .collect();
    let mut rows = schur_toeplitz(&gamma)?;
    for k in 1..n {
        let (head, tail) = rows.split_at_mut(k);
        for (v, p) in tail[0].iter_mut().zip(&head[k - 1]) {
            *v += p;
        }
    }
    Ok(rows)
}

type FactorKey = (u64, usize, u64);

fn factor_cache() -> &'static Mutex<HashMap<FactorKey, Arc<FbmFactor>>> {
    static CACHE: OnceLock<Mutex<HashMap<FactorKey, Arc<FbmFactor>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Shared factor for `(hurst, grid)`, built once per process.
pub fn cached_factor(hurst: f64, grid: TimeGrid) -> Result<Arc<FbmFactor>> {
    let key = (hurst.to_bits(), grid.n_steps(), grid.horizon().to_bits());
    if let Some(f) = factor_cache().lock().expect("factor cache poisoned").get(&key) {
        return Ok(Arc::clone(f));
    }
    let f = Arc::new(FbmFactor::new(hurst, grid)?);
    factor_cache().lock().expect("factor cache poisoned").insert(key, Arc::clone(&f));
    Ok(f)
}

/// Lower-triangular factor `L` of the one-dimensional grid covariance over
/// nodes `1..=n` (node 0 is pinned at zero).
///
/// For `H in (1,2)` the factor is `T L'`, where `L'` belongs to an
/// `(H-1)`-path and `T` is the cumulative trapezoid rule, so the rows are
/// still lower triangular and conditioning works unchanged.
#[derive(Debug, Clone)]
pub struct FbmFactor {
    hurst: f64,
    grid: TimeGrid,
    rows: Vec<Vec<f64>>,
}

impl FbmFactor {
    pub fn new(hurst: f64, grid: TimeGrid) -> Result<Self> {
        check_hurst(hurst)?;
        if hurst < 1.0 {
            Ok(Self { hurst, grid, rows: fbm_rows(hurst, grid)? })
        } else {
            let base = FbmFactor::new(hurst - 1.0, grid)?;
            let dt = grid.dt();
            let n = grid.n_steps();
            let mut rows = Vec::with_capacity(n);
            // running = sum of base rows 0..k-1
            let mut running = vec![0.0; n];
            for k in 0..n {
                let bk = &base.rows[k];
                let row: Vec<f64> = (0..=k)
                    .map(|j| dt * running[j] + 0.5 * dt * bk[j])
                    .collect();
                for (r, v) in running.iter_mut().zip(bk) {
                    *r += v;
                }
                rows.push(row);
            }
            Ok(Self { hurst, grid, rows })
        }
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Factor row for node `k >= 1` (entries for drivers `1..=k`).
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    /// `(L L^T)[s,t]` over nodes `s,t >= 1`.
    pub fn reconstructed_covariance(&self, s: usize, t: usize) -> f64 {
        let (a, b) = (self.row(s), self.row(t));
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Variance of `B_t - E[B_t | B_1..B_s]`.
    pub fn conditional_variance(&self, s: usize, t: usize) -> Result<f64> {
        self.check_pair(s, t)?;
        if t == 0 || s == t {
            return Ok(0.0);
        }
        Ok(self.row(t)[s..].iter().map(|v| v * v).sum())
    }

    fn check_pair(&self, s: usize, t: usize) -> Result<()> {
        if s > t || t > self.grid.n_steps() {
            return Err(invalid(format!("need s <= t <= n, got s={s}, t={t}")));
        }
        Ok(())
    }

    /// `values[k] = sum_{j <= k} L[k,j] z_j` for nodes `from..=n`.
    fn apply(&self, z: &[f64], values: &mut [f64], from: usize) {
        for k in from.max(1)..=self.grid.n_steps() {
            values[k] = self.row(k).iter().zip(z).map(|(l, zj)| l * zj).sum();
        }
    }

    /// Sample a `d`-dimensional path with independent components.
    pub fn sample(self: &Arc<Self>, dim: usize, seed: u64) -> Result<FbmPath> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let n = self.grid.n_steps();
        let mut values = Vec::with_capacity(dim);
        let mut driver = Vec::with_capacity(dim);
        for c in 0..dim {
            let z = rng::normals(&mut rng::stream(seed, "fbm", c as u64), n);
            let mut v = vec![0.0; n + 1];
            self.apply(&z, &mut v, 1);
            values.push(v);
            driver.push(z);
        }
        Ok(FbmPath { hurst: self.hurst, dim, grid: self.grid, values, driver, seed: Some(seed), factor: Arc::clone(self) })
    }
}

/// Gaussian law of `B_t` given the grid history up to `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLaw {
    pub s_index: usize,
    pub t_index: usize,
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// Grid-sampled fBm together with the Gaussian data that generated it.
#[derive(Debug, Clone)]
pub struct FbmPath {
    hurst: f64,
    dim: usize,
    grid: TimeGrid,
    /// `values[c][i]` is component `c` at node `i`.
    values: Vec<Vec<f64>>,
    /// `driver[c][j]` drives node `j+1`.
    driver: Vec<Vec<f64>>,
    seed: Option<u64>,
    factor: Arc<FbmFactor>,
}

/// Sample fBm using the process-wide factor cache.
pub fn sample_fbm(hurst: f64, grid: TimeGrid, dim: usize, seed: u64) -> Result<FbmPath> {
    cached_factor(hurst, grid)?.sample(dim, seed)
}

impl FbmPath {
    /// Path built from explicit values, e.g. a deterministic perturbation of
    /// a sampled path. Conditioning is unavailable on such paths.
    pub fn from_values(reference: &FbmPath, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = reference.grid.n_steps();
        if values.len() != reference.dim || values.iter().any(|v| v.len() != n + 1) {
            return Err(Error::Dimension("values do not match reference path".into()));
        }
        Ok(Self { values, seed: None, ..reference.clone() })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
    pub fn factor(&self) -> &Arc<FbmFactor> {
        &self.factor
    }
    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c]
    }
    pub fn driver(&self, c: usize) -> &[f64] {
        &self.driver[c]
    }
    pub fn value(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    /// Path with every value negated (the mirror noise).
    pub fn negated(&self) -> FbmPath {
        let neg = |v: &Vec<Vec<f64>>| v.iter().map(|c| c.iter().map(|x| -x).collect()).collect();
        FbmPath { values: neg(&self.values), driver: neg(&self.driver), ..self.clone() }
    }

    pub fn conditional_law(&self, s: usize, t: usize) -> Result<ConditionalLaw> {
        let variance = self.factor.conditional_variance(s, t)?;
        let mean = if s == t {
            self.value(t)
        } else if s == 0 {
            vec![0.0; self.dim]
        } else {
            let row = self.factor.row(t);
            self.driver.iter().map(|z| row[..s].iter().zip(z).map(|(l, zj)| l * zj).sum()).collect()
        };
        Ok(ConditionalLaw { s_index: s, t_index: t, mean, variance })
    }

    /// `m` paths sharing this path's drivers up to node `s` with freshly
    /// drawn drivers afterwards.
    pub fn branch_futures(&self, s: usize, m: usize, seed: u64) -> Result<Vec<FbmPath>> {
        let n = self.grid.n_steps();
        if s >= n {
            return Err(invalid(format!("branch point {s} must be below n = {n}")));
        }
        if m == 0 {
            return Err(invalid("need at least one branch"));
        }
        Ok((0..m)
            .into_par_iter()
            .map(|b| self.branch_one(s, seed, b as u64))
            .collect())
    }

    /// One branch, drawn from stream `(seed, "branch", index)`.
    pub fn branch_one(&self, s: usize, seed: u64, index: u64) -> FbmPath {
        let n = self.grid.n_steps();
        let mut rng = rng::stream(seed, "branch", index);
        let mut values = Vec::with_capacity(self.dim);
        let mut driver = Vec::with_capacity(self.dim);
        for c in 0..self.dim {
            let mut z = self.driver[c][..s].to_vec();
            z.extend(rng::normals(&mut rng, n - s));
            let mut v = self.values[c].clone();
            self.factor.apply(&z, &mut v, s + 1);
            values.push(v);
            driver.push(z);
        }
        FbmPath { values, driver, seed: None, ..self.clone() }
    }

    /// CSV with a comment header carrying `H`, seed and `n`, then `t,B_1..B_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(w, "# hurst={},seed={},n={}", self.hurst, seed, self.grid.n_steps())?;
        let cols: Vec<String> = (1..=self.dim).map(|c| format!("B_{c}")).collect();
        writeln!(w, "t,{}", cols.join(","))?;
        for i in 0..=self.grid.n_steps() {
            let vals: Vec<String> = self.values.iter().map(|v| format!("{:e}", v[i])).collect();
            writeln!(w, "{:e},{}", self.grid.node(i), vals.join(","))?;
        }
        Ok(())
    }
}

/// Result of comparing `E[B_{lambda t}^2]` with `lambda^{2H} E[B_t^2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    /// Worst relative deviation of the empirical moments.
    pub max_rel_deviation: f64,
    /// Worst deviation in units of its Monte Carlo standard error.
    pub max_z_score: f64,
    /// Same comparison using the closed-form covariance (no sampling).
    pub exact_rel_deviation: f64,
    pub nodes_compared: usize,
}

/// Check fBm self-similarity on the nodes `t` of a unit grid with `n` steps
/// for which `lambda t` is also a node.
pub fn scaling_moment_check(hurst: f64, lambda: f64, n_steps: usize, n_samples: usize, seed: u64) -> Result<ScalingReport> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(invalid("lambda must lie in (0, 1] so that lambda*t stays on [0,1]"));
    }
    if n_samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let grid = TimeGrid::unit(n_steps)?;
    let pairs: Vec<(usize, usize)> = (1..=n_steps)
        .filter_map(|i| {
            let j = lambda * i as f64;
            let jr = j.round();
            ((j - jr).abs() < 1e-9 && jr >= 1.0).then_some((i, jr as usize))
        })
        .collect();
    if pairs.is_empty() {
        return Err(invalid("no grid node t with lambda*t on the grid"));
    }
    let factor = Arc::new(FbmFactor::new(hurst, grid)?);
    let paths: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| factor.sample(1, rng::derive_seed(seed, "scaling", k as u64)).map(|p| p.values[0].clone()))
        .collect::<Result<_>>()?;
    let scale = lambda.powf(2.0 * hurst);
    let nf = n_samples as f64;
    let (mut max_rel, mut max_z, mut exact) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &(i, j) in &pairs {
        let diffs: Vec<f64> = paths.iter().map(|p| p[j] * p[j] - scale * p[i] * p[i]).collect();
        let mean = diffs.iter().sum::<f64>() / nf;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let base = scale * paths.iter().map(|p| p[i] * p[i]).sum::<f64>() / nf;
        max_rel = max_rel.max((mean / base).abs());
        if var > 0.0 {
            max_z = max_z.max(mean.abs() / (var / nf).sqrt());
        }
        if hurst < 1.0 {
            let (ti, tj) = (grid.node(i), grid.node(j));
            let lhs = fbm_covariance(hurst, tj, tj)?;
            let rhs = scale * fbm_covariance(hurst, ti, ti)?;
            exact = exact.max(((lhs - rhs) / rhs).abs());
        }
    }
    Ok(ScalingReport { lambda, max_rel_deviation: max_rel, max_z_score: max_z, exact_rel_deviation: exact, nodes_compared: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_closed_forms() {
        assert!((fbm_covariance(0.5, 0.3, 0.7).unwrap() - 0.3).abs() < 1e-15);
        assert!((fbm_covariance(0.25, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(0.25, 0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(fbm_covariance(1.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_hurst_and_grid() {
        let g = TimeGrid::unit(8).unwrap();
        assert!(sample_fbm(1.0, g, 1, 0).is_err());
        assert!(sample_fbm(2.0, g, 1, 0).is_err());
        assert!(sample_fbm(-0.1, g, 1, 0).is_err());
        assert!(TimeGrid::unit(0).is_err());
    }

    #[test]
    fn large_factor_stays_accurate() {
        let g = TimeGrid::unit(4096).unwrap();
        for h in [0.2, 0.75] {
            let f = cached_factor(h, g).unwrap();
            for (s, t) in [(1, 1), (1, 4096), (2048, 4095), (4096, 4096)] {
                let want = fbm_covariance(h, g.node(s), g.node(t)).unwrap();
                assert!((f.reconstructed_covariance(s, t) - want).abs() < 1e-9, "H={h} s={s} t={t}");
            }
        }
    }

    #[test]
    fn factor_reconstructs_covariance() {
        for &h in &[0.1, 0.3, 0.5, 0.75, 0.9] {
            let g = TimeGrid::unit(128).unwrap();
            let f = FbmFactor::new(h, g).unwrap();
            for s in (1..=128).step_by(7) {
                for t in (s..=128).step_by(5) {
                    let want = fbm_covariance(h, g.node(s), g.node(t)).unwrap();
                    assert!((f.reconstructed_covariance(s, t) - want).abs() < 1e-8, "H={h} s={s} t={t}");
                }
            }
        }
    }

    #[test]
    fn brownian_conditional_variance_is_elapsed_time() {
        let g = TimeGrid::unit(64).unwrap();
        let p = sample_fbm(0.5, g, 1, 1).unwrap();
        for (s, t) in [(0, 5), (3, 9), (10, 64), (63, 64)] {
            let law = p.conditional_law(s, t).unwrap();
            assert!((law.variance - (g.node(t) - g.node(s))).abs() < 1e-12);
            // Markov: conditional mean is the current value.
            if s > 0 {
                assert!((law.mean[0] - p.component(0)[s]).abs() < 1e-12);
            }
        }
        let law = p.conditional_law(7, 7).unwrap();
        assert_eq!(law.variance, 0.0);
        assert_eq!(law.mean[0], p.component(0)[7]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = TimeGrid::unit(32).unwrap();
        let a = sample_fbm(0.3, g, 2, 9).unwrap();
        let b = sample_fbm(0.3, g, 2, 9).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.value(0), vec![0.0, 0.0]);
    }

    #[test]
    fn second_order_paths_are_trapezoid_integrals() {
        let g = TimeGrid::unit(64).unwrap();
        let p = sample_fbm(1.4, g, 1, 5).unwrap();
        // Rebuild the (H-1)-path from the same driver and integrate it.
        let base = Arc::new(FbmFactor::new(0.4, g).unwrap());
        let mut y = vec![0.0; 65];
        base.apply(p.driver(0), &mut y, 1);
        let mut acc = 0.0;
        for k in 1..=64 {
            acc += 0.5 * g.dt() * (y[k - 1] + y[k]);
            assert!((p.component(0)[k] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn branches_copy_the_past() {
        let g = TimeGrid::unit(64).unwrap();
        let p = sample_fbm(0.3, g, 2, 4).unwrap();
        let br = p.branch_futures(20, 5, 11).unwrap();
        for b in &br {
            for c in 0..2 {
                assert_eq!(&b.component(c)[..=20], &p.component(c)[..=20]);
            }
        }
        assert_ne!(br[0].component(0)[21], br[1].component(0)[21]);
        assert!(p.branch_futures(64, 1, 0).is_err());
    }

    #[test]
    fn exact_scaling_deviation_is_zero() {
        let r = scaling_moment_check(0.7, 0.5, 32, 10, 3).unwrap();
        assert!(r.exact_rel_deviation < 1e-12);
        let r1 = scaling_moment_check(0.7, 1.0, 32, 10, 3).unwrap();
        assert_eq!(r1.max_rel_deviation, 0.0);
    }

    #[test]
    fn csv_has_header() {
        let p = sample_fbm(0.5, TimeGrid::unit(4).unwrap(), 2, 1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# hurst=0.5,seed=1,n=4");
        assert_eq!(lines[1], "t,B_1,B_2");
        assert_eq!(lines.len(), 7);
    }
}
