//! Solvers for `X_t = x0 + int_0^t b_r(X_r) dr + B_t`.
//!
//! Solutions are stored in the decomposition `X = phi + B`, where `phi`
//! carries the initial value and the drift integral.

mod averaged;
mod flow;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use averaged::{averaged_field, AveragedField};
pub use flow::{compute_flow, jacobian_flow, malliavin_directional, two_point_inverse_moment, FlowEntry, FlowGrid, JacobianPath};

use crate::drift::{classify_regime, heat_smooth, DriftField, LacunaryDistribution};
use crate::error::{invalid, Error, Result};
use crate::fbm::{FbmPath, TimeGrid};
use crate::young::DiscretePath;

/// Threshold for the overflow flag.
pub const OVERFLOW: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `phi_{i+1} = phi_i + (int_{t_i}^{t_{i+1}} theta) g(X_i)`.
    #[default]
    Euler,
    /// Predictor-corrector that integrates the time factor exactly against
    /// the linear interpolation of `g(X)` over each step.
    ProductTrapezoid,
}

/// Drift, noise and initial value.
#[derive(Debug, Clone)]
pub struct SdeProblem {
    drift: DriftField,
    noise: DiscretePath,
    hurst: f64,
    x0: Vec<f64>,
}

impl SdeProblem {
    pub fn new(drift: DriftField, noise: &FbmPath, x0: Vec<f64>) -> Result<Self> {
        Self::from_noise_path(drift, DiscretePath::from_fbm(noise), noise.hurst(), x0)
    }

    /// Problem driven by explicit noise values (e.g. a perturbed or
    /// subsampled fBm path).
    pub fn from_noise_path(drift: DriftField, noise: DiscretePath, hurst: f64, x0: Vec<f64>) -> Result<Self> {
        if drift.dim() != noise.dim() || x0.len() != noise.dim() {
            return Err(Error::Dimension(format!(
                "drift dim {}, noise dim {}, x0 dim {}",
                drift.dim(),
                noise.dim(),
                x0.len()
            )));
        }
        Ok(Self { drift, noise, hurst, x0 })
    }

    pub fn drift(&self) -> &DriftField {
        &self.drift
    }
    pub fn noise(&self) -> &DiscretePath {
        &self.noise
    }
    pub fn hurst(&self) -> f64 {
        self.hurst
    }
    pub fn x0(&self) -> &[f64] {
        &self.x0
    }
    pub fn grid(&self) -> TimeGrid {
        self.noise.grid()
    }

    pub fn with_drift(&self, drift: DriftField) -> Result<Self> {
        Self::from_noise_path(drift, self.noise.clone(), self.hurst, self.x0.clone())
    }

    pub fn with_noise(&self, noise: DiscretePath) -> Result<Self> {
        Self::from_noise_path(self.drift.clone(), noise, self.hurst, self.x0.clone())
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Self::from_noise_path(self.drift.clone(), self.noise.clone(), self.hurst, x0)
    }
}

#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub x: DiscretePath,
    /// `phi = X - B`, with `phi_0 = x0`.
    pub phi: DiscretePath,
}

impl SolutionPath {
    /// CSV with columns `t, X_1..X_d, phi_1..phi_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.x.dim();
        let xs: Vec<String> = (1..=d).map(|c| format!("X_{c}")).collect();
        let ps: Vec<String> = (1..=d).map(|c| format!("phi_{c}")).collect();
        writeln!(w, "t,{},{}", xs.join(","), ps.join(","))?;
        let grid = self.x.grid();
        for i in 0..self.x.len() {
            let vals: Vec<String> = self.x.at(i).iter().chain(self.phi.at(i)).map(|v| format!("{v:e}")).collect();
            writeln!(w, "{:e},{}", grid.node(i), vals.join(","))?;
        }
        Ok(())
    }
}

/// Reusable buffers for one drift step.
pub(crate) struct Stepper<'a> {
    drift: &'a DriftField,
    scheme: Scheme,
    grid: TimeGrid,
    x: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(drift: &'a DriftField, scheme: Scheme, grid: TimeGrid) -> Self {
        let d = drift.dim();
        Self { drift, scheme, grid, x: vec![0.0; d], g0: vec![0.0; d], g1: vec![0.0; d] }
    }

    /// Advance `phi` over step `i` given the noise at both ends.
    pub(crate) fn step(&mut self, i: usize, phi: &mut [f64], b_now: &[f64], b_next: &[f64]) {
        let (t0, t1) = (self.grid.node(i), self.grid.node(i + 1));
        let profile = self.drift.profile();
        let w = profile.integral(t0, t1);
        if w == 0.0 {
            return;
        }
        let spatial = self.drift.spatial();
        for k in 0..phi.len() {
            self.x[k] = phi[k] + b_now[k];
        }
        spatial.eval(&self.x, &mut self.g0);
        match self.scheme {
            Scheme::Euler => {
                for k in 0..phi.len() {
                    phi[k] += w * self.g0[k];
                }
            }
            Scheme::ProductTrapezoid => {
                let wr = profile.first_moment(t0, t1) / (t1 - t0);
                let wl = w - wr;
                for k in 0..phi.len() {
                    self.x[k] = phi[k] + w * self.g0[k] + b_next[k];
                }
                spatial.eval(&self.x, &mut self.g1);
                for k in 0..phi.len() {
                    phi[k] += wl * self.g0[k] + wr * self.g1[k];
                }
            }
        }
    }
}

/// Continue `phi` from node `start` to the end of the grid; returns
/// `phi` at nodes `start..=n`.
pub(crate) fn integrate_phi(
    drift: &DriftField,
    scheme: Scheme,
    noise: &DiscretePath,
    start: usize,
    phi_start: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let grid = noise.grid();
    let n = grid.n_steps();
    let mut stepper = Stepper::new(drift, scheme, grid);
    let mut phi = phi_start.to_vec();
    let mut out = Vec::with_capacity(n + 1 - start);
    out.push(phi.clone());
    for i in start..n {
        stepper.step(i, &mut phi, noise.at(i), noise.at(i + 1));
        let size = phi.iter().zip(noise.at(i + 1)).map(|(p, b)| (p + b).powi(2)).sum::<f64>().sqrt();
        if !(size <= OVERFLOW) {
            return Err(Error::Overflow { step: i + 1, value: size });
        }
        out.push(phi.clone());
    }
    Ok(out)
}

pub(crate) fn assemble(noise: &DiscretePath, phi: Vec<Vec<f64>>) -> Result<SolutionPath> {
    let x = phi.iter().zip(noise.values()).map(|(p, b)| p.iter().zip(b).map(|(u, v)| u + v).collect()).collect();
    Ok(SolutionPath { x: DiscretePath::new(noise.grid(), x)?, phi: DiscretePath::new(noise.grid(), phi)? })
}

pub fn solve(problem: &SdeProblem, scheme: Scheme) -> Result<SolutionPath> {
    let phi = integrate_phi(&problem.drift, scheme, &problem.noise, 0, &problem.x0)?;
    assemble(&problem.noise, phi)
}

/// Explicit Euler: `X_{i+1} = X_i + b(X_i) dt + (B_{i+1} - B_i)`, with the
/// time factor of the drift integrated exactly over each step.
pub fn solve_euler(problem: &SdeProblem) -> Result<SolutionPath> {
    solve(problem, Scheme::Euler)
}

/// Something that can be replaced by a smooth drift at scale `tau`.
pub trait Mollifiable {
    fn mollify(&self, tau: f64) -> Result<DriftField>;
    fn alpha(&self) -> f64;
    fn q(&self) -> f64;
}

impl Mollifiable for LacunaryDistribution {
    fn mollify(&self, tau: f64) -> Result<DriftField> {
        LacunaryDistribution::mollify(self, tau)
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn q(&self) -> f64 {
        self.q
    }
}

impl Mollifiable for DriftField {
    fn mollify(&self, tau: f64) -> Result<DriftField> {
        heat_smooth(self, tau)
    }
    fn alpha(&self) -> f64 {
        DriftField::alpha(self)
    }
    fn q(&self) -> f64 {
        DriftField::q(self)
    }
}

#[derive(Debug, Clone)]
pub struct MollifiedFamily {
    pub levels: Vec<f64>,
    pub solutions: Vec<SolutionPath>,
    /// `sup_t |X^{k+1} - X^k|` for consecutive levels.
    pub cauchy_deltas: Vec<f64>,
    pub converged: bool,
    /// Some delta exceeded its predecessor by more than 10%.
    pub non_cauchy: bool,
}

/// Solve along a family of mollifications sharing noise and initial value.
///
/// The drift of `problem` is ignored; `b` and `levels` define the family.
pub fn solve_distributional(
    b: &dyn Mollifiable,
    levels: &[f64],
    problem: &SdeProblem,
    scheme: Scheme,
    tolerance: f64,
) -> Result<MollifiedFamily> {
    let regime = classify_regime(problem.hurst, b.q(), b.alpha())?;
    regime.require_condition_a()?;
    if levels.len() < 2 {
        return Err(invalid("need at least two smoothing levels"));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("smoothing levels must be strictly decreasing"));
    }
    let solutions = levels
        .iter()
        .map(|&tau| solve(&problem.with_drift(b.mollify(tau)?)?, scheme))
        .collect::<Result<Vec<_>>>()?;
    let cauchy_deltas: Vec<f64> = solutions.windows(2).map(|w| w[0].x.sup_distance(&w[1].x)).collect();
    let non_cauchy = cauchy_deltas.windows(2).any(|w| w[1] > 1.1 * w[0]);
    let converged = cauchy_deltas.last().is_some_and(|&d| d < tolerance);
    Ok(MollifiedFamily { levels: levels.to_vec(), solutions, cauchy_deltas, converged, non_cauchy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{Constant, TimeProfile, TrigSeries};
    use crate::fbm::sample_fbm;
    use std::sync::Arc;

    fn noise(n: usize, seed: u64) -> FbmPath {
        sample_fbm(0.4, TimeGrid::unit(n).unwrap(), 1, seed).unwrap()
    }

    #[test]
    fn zero_drift_gives_shifted_noise() {
        let b = noise(64, 1);
        let p = SdeProblem::new(DriftField::zero(1), &b, vec![0.3]).unwrap();
        for scheme in [Scheme::Euler, Scheme::ProductTrapezoid] {
            let s = solve(&p, scheme).unwrap();
            for i in 0..=64 {
                assert_eq!(s.x.at(i)[0], 0.3 + b.component(0)[i]);
                assert_eq!(s.phi.at(i)[0], 0.3);
            }
        }
    }

    #[test]
    fn constant_drift_is_exact() {
        let b = noise(128, 2);
        let c = DriftField::autonomous(Arc::new(Constant { value: vec![-0.7] }), 1.0);
        let p = SdeProblem::new(c, &b, vec![1.0]).unwrap();
        let s = solve_euler(&p).unwrap();
        let g = b.grid();
        for i in 0..=128 {
            let want = 1.0 - 0.7 * g.node(i) + b.component(0)[i];
            assert!((s.x.at(i)[0] - want).abs() < 1e-13);
            // decomposition
            assert!((s.x.at(i)[0] - s.phi.at(i)[0] - b.component(0)[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn overflow_is_flagged() {
        let b = noise(64, 3);
        let f = DriftField::autonomous(Arc::new(crate::drift::Linear::scalar(1e4)), 1.0);
        let err = solve_euler(&SdeProblem::new(f, &b, vec![1.0]).unwrap()).unwrap_err();
        assert!(err.is_divergence());
    }

    #[test]
    fn time_singular_drift_uses_exact_weights() {
        // theta(t) = t^(-1/2): Euler with exact step integrals is exact for g = 1
        let b = noise(32, 4);
        let f = DriftField::new(
            Arc::new(Constant { value: vec![1.0] }),
            TimeProfile::Power { scale: 1.0, origin: 0.0, exponent: 0.5 },
            1.0,
            1.5,
        )
        .unwrap();
        let s = solve_euler(&SdeProblem::new(f, &b, vec![0.0]).unwrap()).unwrap();
        let g = b.grid();
        for i in 0..=32 {
            assert!((s.phi.at(i)[0] - 2.0 * g.node(i).sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn distributional_requires_condition_a() {
        let b = sample_fbm(0.5, TimeGrid::unit(64).unwrap(), 1, 1).unwrap();
        let p = SdeProblem::new(DriftField::zero(1), &b, vec![0.0]).unwrap();
        let bad = LacunaryDistribution::new(-0.5, 2.0, 0, 1.0, TimeProfile::Constant(1.0), 2.0).unwrap();
        assert!(matches!(solve_distributional(&bad, &[0.1, 0.01], &p, Scheme::Euler, 1e-3), Err(Error::Regime(_))));
        let zero = DriftField::zero(1).with_metadata(0.5, 2.0).unwrap();
        let fam = solve_distributional(&zero, &[0.1, 0.01, 0.001], &p, Scheme::Euler, 1e-3).unwrap();
        assert!(fam.cauchy_deltas.iter().all(|&d| d == 0.0));
        assert!(fam.converged);
    }

    #[test]
    fn smooth_drift_euler_converges_at_order_one() {
        let fine = 4096;
        let b = sample_fbm(0.5, TimeGrid::unit(fine).unwrap(), 1, 9).unwrap();
        let drift = DriftField::autonomous(Arc::new(TrigSeries::sine(1.0, 2.0)), 1.0);
        let solve_at = |n: usize| {
            let stride = fine / n;
            let vals: Vec<f64> = (0..=n).map(|i| b.component(0)[i * stride]).collect();
            let path = DiscretePath::scalar(TimeGrid::unit(n).unwrap(), vals).unwrap();
            let p = SdeProblem::from_noise_path(drift.clone(), path, 0.5, vec![0.2]).unwrap();
            solve_euler(&p).unwrap()
        };
        let reference = solve_at(fine);
        let (mut h, mut e) = (Vec::new(), Vec::new());
        for n in [16, 32, 64, 128, 256] {
            let s = solve_at(n);
            let stride = fine / n;
            let err = (0..=n).map(|i| (s.x.at(i)[0] - reference.x.at(i * stride)[0]).abs()).fold(0.0, f64::max);
            h.push(1.0 / n as f64);
            e.push(err);
        }
        let fit = crate::stats::ScalingFit::loglog(&h, &e).unwrap();
        assert!(fit.slope >= 0.9, "order {}", fit.slope);
        let _ = drift.spatial().name();
    }
}
