//! Distribution-dependent SDEs with drift `F_t(x, mu) = f_t(x) + (g_t * mu)(x)`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::drift::{classify_regime, DriftField};
use crate::error::{invalid, Error, Result};
use crate::fbm::{cached_factor, TimeGrid};
use crate::rng::{derive_seed, stream};
use crate::sde::{SolutionPath, OVERFLOW};
use crate::stats::{mean, ScalingFit};
use crate::young::DiscretePath;

/// Equal-weight particle cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    particles: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(particles: Vec<Vec<f64>>) -> Result<Self> {
        let d = particles.first().map(Vec::len).ok_or_else(|| Error::Empty("empirical measure".into()))?;
        if d == 0 || particles.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension("particles must share a positive dimension".into()));
        }
        Ok(Self { particles })
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }
    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }
    pub fn particles(&self) -> &[Vec<f64>] {
        &self.particles
    }
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim()).map(|c| self.particles.iter().map(|p| p[c]).sum::<f64>() / self.len() as f64).collect()
    }

    /// Projection onto the unit vector `e`.
    pub fn project(&self, e: &[f64]) -> Vec<f64> {
        self.particles.iter().map(|p| p.iter().zip(e).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Exact `W_1` between two equal-weight empirical measures on the line,
/// `int_0^1 |F_a^{-1}(u) - F_b^{-1}(u)| du`; sample sizes may differ.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Wasserstein distance needs samples on both sides".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / na as f64);
    }
    // merge the quantile breakpoints k/na and l/nb (integer cross-multiplied)
    let (mut i, mut j, mut u_prev, mut total) = (0usize, 0usize, 0u128, 0.0);
    let scale = (na as u128) * (nb as u128);
    while i < na && j < nb {
        let ua = (i as u128 + 1) * nb as u128;
        let ub = (j as u128 + 1) * na as u128;
        let u = ua.min(ub);
        total += (u - u_prev) as f64 * (a[i] - b[j]).abs();
        u_prev = u;
        if ua == u {
            i += 1;
        }
        if ub == u {
            j += 1;
        }
    }
    Ok(total / scale as f64)
}

/// Sliced `W_1`: mean of one-dimensional distances over random directions.
/// An approximation used for `d > 1`.
pub fn sliced_wasserstein1(a: &EmpiricalMeasure, b: &EmpiricalMeasure, directions: usize, seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension("measures live in different dimensions".into()));
    }
    if a.dim() == 1 {
        return wasserstein1_1d(&a.project(&[1.0]), &b.project(&[1.0]));
    }
    let mut rng = stream(seed, "sliced", 0);
    let mut acc = 0.0;
    for _ in 0..directions.max(1) {
        let mut e = crate::rng::normals(&mut rng, a.dim());
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        e.iter_mut().for_each(|v| *v /= norm);
        acc += wasserstein1_1d(&a.project(&e), &b.project(&e))?;
    }
    Ok(acc / directions.max(1) as f64)
}

/// Law of the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialLaw {
    Deterministic(Vec<f64>),
    /// Independent components `N(mean_c, std^2)`.
    Gaussian { mean: Vec<f64>, std: f64 },
}

impl InitialLaw {
    fn dim(&self) -> usize {
        match self {
            InitialLaw::Deterministic(x) => x.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            InitialLaw::Deterministic(x) => Ok(x.clone()),
            InitialLaw::Gaussian { mean, std } => {
                let n = Normal::new(0.0, *std).map_err(|e| invalid(e.to_string()))?;
                Ok(mean.iter().map(|m| m + n.sample(rng)).collect())
            }
        }
    }

    /// The same law translated by `c`.
    pub fn shifted(&self, c: &[f64]) -> Self {
        let add = |x: &[f64]| x.iter().zip(c).map(|(a, b)| a + b).collect();
        match self {
            InitialLaw::Deterministic(x) => InitialLaw::Deterministic(add(x)),
            InitialLaw::Gaussian { mean, std } => InitialLaw::Gaussian { mean: add(mean), std: *std },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MkvProblem {
    pub f: DriftField,
    /// Interaction kernel: `(g_t * mu)(x) = int g_t(x - y) mu(dy)`.
    pub g: DriftField,
    pub hurst: f64,
    pub grid: TimeGrid,
    pub x0: InitialLaw,
    pub seed: u64,
}

impl MkvProblem {
    /// Dimension and regime checks run by both solvers.
    pub fn validate(&self) -> Result<()> {
        let d = self.f.dim();
        if self.g.dim() != d || self.x0.dim() != d {
            return Err(Error::Dimension("f, g and the initial law must share a dimension".into()));
        }
        // Condition A caps q at 2 and alpha below 1; on a bounded horizon
        // L^q_t embeds into L^2_t, and C^1 into every C^alpha
        for b in [&self.f, &self.g] {
            classify_regime(self.hurst, b.q().min(2.0), b.alpha().min(0.99))?.require_condition_a()?;
        }
        Ok(())
    }

    /// `t -> |theta_f(t)| + |theta_g(t)|`, integrated to the power `q` over steps.
    fn weight_exponent(&self) -> Vec<f64> {
        let q = self.f.q().min(self.g.q());
        let q = if q.is_finite() { q } else { 1.0 };
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for i in 0..self.grid.n_steps() {
            let (a, b) = (self.grid.node(i), self.grid.node(i + 1));
            // (|f| + |g|)^q <= 2^(q-1) (|f|^q + |g|^q); the bound is enough for a weight
            acc += 2f64.powf(q - 1.0) * (self.f.profile().power_integral(q, a, b) + self.g.profile().power_integral(q, a, b));
            out.push(acc);
        }
        out
    }

    /// Noise path and initial value of particle `j`; identical across
    /// Picard iterations and solvers.
    fn particle(&self, j: usize) -> Result<(DiscretePath, Vec<f64>)> {
        let factor = cached_factor(self.hurst, self.grid)?;
        let b = factor.sample(self.f.dim(), derive_seed(self.seed, "particle", j as u64))?;
        let x0 = self.x0.sample(&mut stream(self.seed, "x0", j as u64))?;
        Ok((DiscretePath::from_fbm(&b), x0))
    }
}

/// `phi += w_f f(x) + w_g (1/N) sum_y g(x - y)` at one node.
fn mkv_increment(p: &MkvProblem, i: usize, x: &[f64], cloud: &[Vec<f64>], out: &mut [f64]) {
    let d = x.len();
    let (a, b) = (p.grid.node(i), p.grid.node(i + 1));
    let wf = p.f.profile().integral(a, b);
    let wg = p.g.profile().integral(a, b);
    let mut fx = vec![0.0; d];
    p.f.spatial().eval(x, &mut fx);
    let mut conv = vec![0.0; d];
    if wg != 0.0 {
        let mut tmp = vec![0.0; d];
        let mut diff = vec![0.0; d];
        for y in cloud {
            for c in 0..d {
                diff[c] = x[c] - y[c];
            }
            p.g.spatial().eval(&diff, &mut tmp);
            for c in 0..d {
                conv[c] += tmp[c];
            }
        }
        for c in conv.iter_mut() {
            *c /= cloud.len() as f64;
        }
    }
    for c in 0..d {
        out[c] = wf * fx[c] + wg * conv[c];
    }
}

/// Solve one particle against a frozen measure path (`clouds[i]` at node `i`).
fn solve_frozen(p: &MkvProblem, noise: &DiscretePath, x0: &[f64], clouds: Option<&[Vec<Vec<f64>>]>) -> Result<SolutionPath> {
    let d = x0.len();
    let n = p.grid.n_steps();
    let mut phi = x0.to_vec();
    let mut phis = vec![phi.clone()];
    let mut x = vec![0.0; d];
    let mut inc = vec![0.0; d];
    for i in 0..n {
        for c in 0..d {
            x[c] = phi[c] + noise.at(i)[c];
        }
        mkv_increment(p, i, &x, clouds.map_or(&[][..], |cl| &cl[i]), &mut inc);
        if clouds.is_none() {
            // no measure yet: only f acts
            let w = p.f.profile().integral(p.grid.node(i), p.grid.node(i + 1));
            let mut fx = vec![0.0; d];
            p.f.spatial().eval(&x, &mut fx);
            inc.iter_mut().zip(&fx).for_each(|(o, v)| *o = w * v);
        }
        for c in 0..d {
            phi[c] += inc[c];
        }
        let size = phi.iter().zip(noise.at(i + 1)).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        if !(size <= OVERFLOW) {
            return Err(Error::Overflow { step: i + 1, value: size });
        }
        phis.push(phi.clone());
    }
    let xs = phis.iter().zip(noise.values()).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect()).collect();
    Ok(SolutionPath { x: DiscretePath::new(p.grid, xs)?, phi: DiscretePath::new(p.grid, phis)? })
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardDiagnostics {
    /// `d_E(Y^{k+1}, Y^k)` with the selected `lambda`.
    pub distances: Vec<f64>,
    pub lambda: f64,
    /// Largest ratio of consecutive distances at `lambda`.
    pub contraction: f64,
    /// Fit of `ln d_k` against `k` (distances below `1e-13` excluded).
    pub fit: Option<ScalingFit>,
    /// Distances rose in three consecutive iterations.
    pub diverged: bool,
    /// `t -> mean_j |Y^{k+1}_j(t) - Y^k_j(t)|` per iteration.
    pub mean_gaps: Vec<Vec<f64>>,
    /// `int_0^{t_i} h^q` on the grid.
    pub weight_exponent: Vec<f64>,
}

/// Grid searched for the weight parameter.
pub const LAMBDA_GRID: [f64; 12] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];

/// `sup_t exp(-lambda int_0^t h^q) gap(t)`.
pub fn weighted_distance(gap: &[f64], weight_exponent: &[f64], lambda: f64) -> f64 {
    gap.iter().zip(weight_exponent).map(|(g, w)| (-lambda * w).exp() * g).fold(0.0, f64::max)
}

fn ratios(d: &[f64]) -> f64 {
    d.windows(2).filter(|w| w[0] > 1e-13).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

/// Picard iteration on laws: freeze the empirical law of the current
/// ensemble, re-solve every particle against it with its own fixed noise,
/// and record successive weighted distances.
pub fn solve_mkv_picard(problem: &MkvProblem, iterations: usize, n_particles: usize) -> Result<(Vec<SolutionPath>, PicardDiagnostics)> {
    problem.validate()?;
    if iterations == 0 || n_particles == 0 {
        return Err(invalid("need at least one iteration and one particle"));
    }
    let data: Vec<(DiscretePath, Vec<f64>)> = (0..n_particles).map(|j| problem.particle(j)).collect::<Result<_>>()?;
    let n = problem.grid.n_steps();
    // Y^0 ignores the interaction
    let mut current: Vec<SolutionPath> = data.par_iter().map(|(b, x0)| solve_frozen(problem, b, x0, None)).collect::<Result<_>>()?;
    let mut mean_gaps = Vec::new();
    for _ in 0..iterations {
        let clouds: Vec<Vec<Vec<f64>>> = (0..=n).map(|i| current.iter().map(|s| s.x.at(i).to_vec()).collect()).collect();
        let next: Vec<SolutionPath> =
            data.par_iter().map(|(b, x0)| solve_frozen(problem, b, x0, Some(&clouds))).collect::<Result<_>>()?;
        let gap: Vec<f64> = (0..=n)
            .map(|i| {
                let per: Vec<f64> = next
                    .iter()
                    .zip(&current)
                    .map(|(a, b)| a.x.at(i).iter().zip(b.x.at(i)).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
                    .collect();
                mean(&per)
            })
            .collect();
        mean_gaps.push(gap);
        current = next;
    }
    let wexp = problem.weight_exponent();
    let dist_at = |lambda: f64| -> Vec<f64> { mean_gaps.iter().map(|g| weighted_distance(g, &wexp, lambda)).collect() };
    let lambda = LAMBDA_GRID
        .iter()
        .copied()
        .find(|&l| ratios(&dist_at(l)) <= 0.5)
        .unwrap_or_else(|| LAMBDA_GRID.iter().copied().min_by(|&a, &b| ratios(&dist_at(a)).total_cmp(&ratios(&dist_at(b)))).unwrap_or(0.0));
    let distances = dist_at(lambda);
    let diverged = distances.windows(4).any(|w| w[1] > w[0] && w[2] > w[1] && w[3] > w[2]);
    let (ks, logs): (Vec<f64>, Vec<f64>) =
        distances.iter().enumerate().filter(|(_, &d)| d >= 1e-13).map(|(k, d)| (k as f64, d.ln())).unzip();
    let fit = if ks.len() >= 3 { ScalingFit::linear(&ks, &logs).ok() } else { None };
    Ok((
        current,
        PicardDiagnostics { contraction: ratios(&distances), distances, lambda, fit, diverged, mean_gaps, weight_exponent: wexp },
    ))
}

/// Empirical measures on every grid node.
#[derive(Debug, Clone)]
pub struct MeasurePath {
    pub grid: TimeGrid,
    pub measures: Vec<EmpiricalMeasure>,
}

impl MeasurePath {
    pub fn terminal(&self) -> &EmpiricalMeasure {
        self.measures.last().expect("nonempty measure path")
    }

    /// CSV with columns `t, particle, x_1..x_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.measures[0].dim();
        let cols: Vec<String> = (1..=d).map(|c| format!("x_{c}")).collect();
        writeln!(w, "t,particle,{}", cols.join(","))?;
        for (i, m) in self.measures.iter().enumerate() {
            for (j, p) in m.particles().iter().enumerate() {
                let v: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
                writeln!(w, "{:e},{j},{}", self.grid.node(i), v.join(","))?;
            }
        }
        Ok(())
    }
}

/// Interacting particle system: every step uses the live empirical measure.
pub fn solve_mkv_particles(problem: &MkvProblem, n_particles: usize) -> Result<MeasurePath> {
    problem.validate()?;
    if n_particles == 0 {
        return Err(invalid("need at least one particle"));
    }
    let data: Vec<(DiscretePath, Vec<f64>)> = (0..n_particles).map(|j| problem.particle(j)).collect::<Result<_>>()?;
    let d = problem.f.dim();
    let mut phi: Vec<Vec<f64>> = data.iter().map(|(_, x0)| x0.clone()).collect();
    let position = |phi: &[Vec<f64>], i: usize| -> Vec<Vec<f64>> {
        phi.iter().zip(&data).map(|(p, (b, _))| p.iter().zip(b.at(i)).map(|(u, v)| u + v).collect()).collect()
    };
    let mut measures = vec![EmpiricalMeasure::new(position(&phi, 0))?];
    for i in 0..problem.grid.n_steps() {
        let cloud = measures[i].particles().to_vec();
        let incs: Vec<Vec<f64>> = cloud
            .par_iter()
            .map(|x| {
                let mut out = vec![0.0; d];
                mkv_increment(problem, i, x, &cloud, &mut out);
                out
            })
            .collect();
        for (p, inc) in phi.iter_mut().zip(&incs) {
            for c in 0..d {
                p[c] += inc[c];
            }
        }
        let next = position(&phi, i + 1);
        if let Some(v) = next.iter().flatten().find(|v| !(v.abs() <= OVERFLOW)) {
            return Err(Error::Overflow { step: i + 1, value: *v });
        }
        measures.push(EmpiricalMeasure::new(next)?);
    }
    Ok(MeasurePath { grid: problem.grid, measures })
}
