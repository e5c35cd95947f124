//! Flows `Phi_{s->t}(x)` of the Euler scheme, their Jacobians and the
//! Malliavin directional derivative.
//!
//! All derivatives here are exact derivatives of the discrete Euler map,
//! so they agree with finite differences of the computed flow up to the
//! finite-difference error alone.

use std::io::Write;

use rayon::prelude::*;

use super::{integrate_phi, Scheme, SdeProblem};
use crate::drift::DriftField;
use crate::error::{Error, Result};
use crate::young::DiscretePath;

fn gradient_error(drift: &DriftField) -> Error {
    Error::GradientUnavailable(format!(
        "drift '{}' has no pointwise gradient; mollify it first (heat_smooth or a mollified level)",
        drift.name()
    ))
}

/// `(I + w G)` applied on the left of the row-major `d x d` matrix `m`.
fn left_step(w: f64, g: &[f64], m: &[f64], d: usize) -> Vec<f64> {
    let mut out = m.to_vec();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] += w * (0..d).map(|k| g[i * d + k] * m[k * d + j]).sum::<f64>();
        }
    }
    out
}

/// Inverse of `I + w G`.
fn step_inverse(w: f64, g: &[f64], d: usize) -> Result<Vec<f64>> {
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| f64::from(u8::from(i == j)) + w * g[i * d + j]);
    let inv = m.try_inverse().ok_or_else(|| Error::Dimension("singular Euler step matrix".into()))?;
    Ok((0..d * d).map(|k| inv[(k / d, k % d)]).collect())
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    (0..d * d).map(|k| (0..d).map(|l| a[(k / d) * d + l] * b[l * d + k % d]).sum()).collect()
}

fn identity(d: usize) -> Vec<f64> {
    (0..d * d).map(|k| f64::from(u8::from(k / d == k % d))).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn determinant(m: &[f64], d: usize) -> f64 {
    nalgebra::DMatrix::from_row_slice(d, d, m).determinant()
}

/// Trajectory from `(s, x)` with its Jacobian `J_{s->t}` and inverse
/// Jacobian `K_{s->t}`, one entry per node `s..=n`.
#[derive(Debug, Clone)]
pub struct JacobianPath {
    pub start: usize,
    pub x: Vec<Vec<f64>>,
    pub jacobian: Vec<Vec<f64>>,
    pub inverse: Vec<Vec<f64>>,
}

impl JacobianPath {
    /// `max_t ||J K - I||_max`.
    pub fn inverse_residual(&self) -> f64 {
        let d = self.x[0].len();
        let id = identity(d);
        self.jacobian
            .iter()
            .zip(&self.inverse)
            .map(|(j, k)| matmul(j, k, d).iter().zip(&id).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

/// Solve from `x` at node `s` and propagate `J_{i+1} = (I + w_i grad g(X_i)) J_i`
/// and `K_{i+1} = K_i (I + w_i grad g(X_i))^{-1}`, where `w_i` is the exact
/// integral of the time factor over step `i`.
pub fn jacobian_flow(drift: &DriftField, noise: &DiscretePath, s: usize, x: &[f64]) -> Result<JacobianPath> {
    let d = drift.dim();
    if drift.spatial().gradient(x).is_none() {
        return Err(gradient_error(drift));
    }
    let grid = noise.grid();
    let phi0: Vec<f64> = x.iter().zip(noise.at(s)).map(|(a, b)| a - b).collect();
    let phi = integrate_phi(drift, Scheme::Euler, noise, s, &phi0)?;
    let xs: Vec<Vec<f64>> = phi
        .iter()
        .enumerate()
        .map(|(k, p)| p.iter().zip(noise.at(s + k)).map(|(a, b)| a + b).collect())
        .collect();
    let mut j = identity(d);
    let mut kk = identity(d);
    let mut jac = vec![j.clone()];
    let mut inv = vec![kk.clone()];
    for (k, xk) in xs.iter().enumerate().take(xs.len() - 1) {
        let i = s + k;
        let w = drift.profile().integral(grid.node(i), grid.node(i + 1));
        let g = drift.spatial().gradient(xk).ok_or_else(|| gradient_error(drift))?;
        j = left_step(w, &g, &j, d);
        kk = matmul(&kk, &step_inverse(w, &g, d)?, d);
        jac.push(j.clone());
        inv.push(kk.clone());
    }
    Ok(JacobianPath { start: s, x: xs, jacobian: jac, inverse: inv })
}

#[derive(Debug, Clone)]
pub struct FlowEntry {
    pub s: usize,
    pub t: usize,
    pub x_index: usize,
    pub phi: Vec<f64>,
    pub jacobian: Option<Vec<f64>>,
    pub inverse: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FlowGrid {
    pub s_list: Vec<usize>,
    pub t_list: Vec<usize>,
    pub x_lattice: Vec<Vec<f64>>,
    /// Entries for every `s <= t` pair and lattice point, ordered by
    /// `(s, x_index, t)`.
    pub entries: Vec<FlowEntry>,
    /// `max |Phi_{s->t}(x) - Phi_{r->t}(Phi_{s->r}(x))|` over `r` in `s_list`.
    pub semiflow_residual: f64,
    /// `max ||J K - I||` over all entries (0 without gradients).
    pub inverse_residual: f64,
}

impl FlowGrid {
    pub fn get(&self, s: usize, t: usize, x_index: usize) -> Option<&FlowEntry> {
        self.entries.iter().find(|e| e.s == s && e.t == t && e.x_index == x_index)
    }

    /// CSV with columns `s, t, x_index, Phi_*, J_* (row-major), detJ`.
    pub fn write_csv<W: Write>(&self, mut w: W, dt: f64) -> std::io::Result<()> {
        let d = self.x_lattice.first().map_or(1, Vec::len);
        let phis: Vec<String> = (1..=d).map(|c| format!("Phi_{c}")).collect();
        let js: Vec<String> = (0..d * d).map(|k| format!("J_{}{}", k / d + 1, k % d + 1)).collect();
        writeln!(w, "s,t,x_index,{},{},detJ", phis.join(","), js.join(","))?;
        for e in &self.entries {
            let mut cols: Vec<String> = e.phi.iter().map(|v| format!("{v:e}")).collect();
            match &e.jacobian {
                Some(j) => {
                    cols.extend(j.iter().map(|v| format!("{v:e}")));
                    cols.push(format!("{:e}", determinant(j, d)));
                }
                None => cols.extend(std::iter::repeat_n(String::new(), d * d + 1)),
            }
            writeln!(w, "{:e},{:e},{},{}", e.s as f64 * dt, e.t as f64 * dt, e.x_index, cols.join(","))?;
        }
        Ok(())
    }
}

/// Flow of the Euler scheme on a shared noise path. Jacobians are filled in
/// when the drift has a gradient.
pub fn compute_flow(
    drift: &DriftField,
    noise: &DiscretePath,
    s_list: &[usize],
    t_list: &[usize],
    x_lattice: &[Vec<f64>],
) -> Result<FlowGrid> {
    let n = noise.grid().n_steps();
    if s_list.iter().chain(t_list).any(|&i| i > n) {
        return Err(Error::InvalidParameter(format!("flow times must be grid indices <= {n}")));
    }
    if x_lattice.iter().any(|x| x.len() != drift.dim()) {
        return Err(Error::Dimension("lattice points must match the drift dimension".into()));
    }
    let with_gradient = x_lattice.first().is_some_and(|x| drift.spatial().gradient(x).is_some());
    let jobs: Vec<(usize, usize)> = s_list.iter().flat_map(|&s| (0..x_lattice.len()).map(move |k| (s, k))).collect();
    let paths: Vec<(usize, usize, JacobianPath)> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let x = &x_lattice[k];
            let path = if with_gradient {
                jacobian_flow(drift, noise, s, x)?
            } else {
                let phi0: Vec<f64> = x.iter().zip(noise.at(s)).map(|(a, b)| a - b).collect();
                let phi = integrate_phi(drift, Scheme::Euler, noise, s, &phi0)?;
                let xs = phi
                    .iter()
                    .enumerate()
                    .map(|(m, p)| p.iter().zip(noise.at(s + m)).map(|(a, b)| a + b).collect())
                    .collect();
                JacobianPath { start: s, x: xs, jacobian: Vec::new(), inverse: Vec::new() }
            };
            Ok((s, k, path))
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::new();
    for (s, k, path) in &paths {
        for &t in t_list.iter().filter(|&&t| t >= *s) {
            let m = t - s;
            entries.push(FlowEntry {
                s: *s,
                t,
                x_index: *k,
                phi: path.x[m].clone(),
                jacobian: path.jacobian.get(m).cloned(),
                inverse: path.inverse.get(m).cloned(),
            });
        }
    }
    let inverse_residual = paths.iter().map(|(_, _, p)| if p.jacobian.is_empty() { 0.0 } else { p.inverse_residual() }).fold(0.0, f64::max);

    // composition check: restart at every intermediate r in s_list
    let mut checks = Vec::new();
    for (s, _, path) in &paths {
        for &r in s_list.iter().filter(|&&r| r > *s) {
            checks.push((*s, r, path));
        }
    }
    let semiflow_residual = checks
        .par_iter()
        .map(|&(s, r, path)| {
            let xr = &path.x[r - s];
            let phi0: Vec<f64> = xr.iter().zip(noise.at(r)).map(|(a, b)| a - b).collect();
            let phi = integrate_phi(drift, Scheme::Euler, noise, r, &phi0)?;
            let mut worst = 0.0_f64;
            for &t in t_list.iter().filter(|&&t| t >= r) {
                let direct = &path.x[t - s];
                for c in 0..direct.len() {
                    worst = worst.max((phi[t - r][c] + noise.at(t)[c] - direct[c]).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    Ok(FlowGrid {
        s_list: s_list.to_vec(),
        t_list: t_list.to_vec(),
        x_lattice: x_lattice.to_vec(),
        entries,
        semiflow_residual,
        inverse_residual,
    })
}

/// Derivative of the Euler solution in the direction `h` of the noise:
/// `D_{i+1} = D_i + w_i grad g(X_i) D_i + (h_{i+1} - h_i)`.
pub fn malliavin_directional(problem: &SdeProblem, h: &DiscretePath) -> Result<DiscretePath> {
    let drift = problem.drift();
    let noise = problem.noise();
    let d = drift.dim();
    if h.grid() != noise.grid() || h.dim() != d {
        return Err(Error::Dimension("perturbation must share the noise grid and dimension".into()));
    }
    if h.at(0).iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidParameter("perturbation must start at 0".into()));
    }
    if drift.spatial().gradient(problem.x0()).is_none() {
        return Err(gradient_error(drift));
    }
    let sol = super::solve(problem, Scheme::Euler)?;
    let grid = noise.grid();
    let mut dx = vec![0.0; d];
    let mut out = vec![dx.clone()];
    for i in 0..grid.n_steps() {
        let w = drift.profile().integral(grid.node(i), grid.node(i + 1));
        let g = drift.spatial().gradient(sol.x.at(i)).ok_or_else(|| gradient_error(drift))?;
        let mut next = vec![0.0; d];
        for a in 0..d {
            let gd: f64 = (0..d).map(|b| g[a * d + b] * dx[b]).sum();
            next[a] = dx[a] + w * gd + h.at(i + 1)[a] - h.at(i)[a];
        }
        dx = next;
        out.push(dx.clone());
    }
    DiscretePath::new(grid, out)
}

/// `mean_k |x - y| / min_t |Phi_{0->t}(x) - Phi_{0->t}(y)|` over noise paths.
pub fn two_point_inverse_moment(drift: &DriftField, noises: &[DiscretePath], x: &[f64], y: &[f64]) -> Result<f64> {
    let dist0 = dist(x, y);
    let vals = noises
        .par_iter()
        .map(|b| {
            let px: Vec<f64> = x.iter().zip(b.at(0)).map(|(a, c)| a - c).collect();
            let py: Vec<f64> = y.iter().zip(b.at(0)).map(|(a, c)| a - c).collect();
            let fx = integrate_phi(drift, Scheme::Euler, b, 0, &px)?;
            let fy = integrate_phi(drift, Scheme::Euler, b, 0, &py)?;
            let min = fx.iter().zip(&fy).map(|(u, v)| dist(u, v)).fold(f64::INFINITY, f64::min);
            Ok(dist0 / min)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::stats::mean(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{Linear, TrigSeries};
    use crate::fbm::{sample_fbm, TimeGrid};
    use std::sync::Arc;

    fn noise(n: usize, seed: u64) -> DiscretePath {
        DiscretePath::from_fbm(&sample_fbm(0.5, TimeGrid::unit(n).unwrap(), 1, seed).unwrap())
    }

    fn smooth() -> DriftField {
        DriftField::autonomous(Arc::new(TrigSeries::sine(1.0, 3.0)), 1.0)
    }

    #[test]
    fn zero_drift_flow_is_translation() {
        let b = noise(64, 1);
        let lat = vec![vec![-1.0], vec![0.5]];
        let f = compute_flow(&DriftField::zero(1), &b, &[0, 16], &[16, 64], &lat).unwrap();
        for e in &f.entries {
            let want = lat[e.x_index][0] + b.at(e.t)[0] - b.at(e.s)[0];
            assert!((e.phi[0] - want).abs() < 1e-14);
            assert_eq!(e.jacobian.as_deref(), Some(&[1.0][..]));
        }
        assert_eq!(f.get(16, 16, 1).unwrap().phi, vec![0.5]);
    }

    #[test]
    fn smooth_flow_composes_and_inverts() {
        let b = noise(2048, 2);
        let lat: Vec<Vec<f64>> = (0..5).map(|k| vec![-1.0 + 0.5 * k as f64]).collect();
        let f = compute_flow(&smooth(), &b, &[0, 512, 1024], &[1024, 2048], &lat).unwrap();
        assert!(f.semiflow_residual < 1e-12, "{}", f.semiflow_residual);
        assert!(f.inverse_residual < 1e-6, "{}", f.inverse_residual);
        // finite differences of the flow in x
        let h = 1e-4;
        for e in f.entries.iter().filter(|e| e.s == 0 && e.t == 2048) {
            let x = lat[e.x_index][0];
            let up = compute_flow(&smooth(), &b, &[0], &[2048], &[vec![x + h]]).unwrap();
            let dn = compute_flow(&smooth(), &b, &[0], &[2048], &[vec![x - h]]).unwrap();
            let fd = (up.entries[0].phi[0] - dn.entries[0].phi[0]) / (2.0 * h);
            let j = e.jacobian.as_ref().unwrap()[0];
            assert!((fd - j).abs() < 1e-3 * j.abs(), "fd {fd} j {j}");
            assert!(j > 0.0);
        }
    }

    #[test]
    fn linear_jacobian_is_explicit() {
        let b = noise(100, 3);
        let drift = DriftField::autonomous(Arc::new(Linear::scalar(0.5)), 1.0);
        let p = jacobian_flow(&drift, &b, 0, &[1.0]).unwrap();
        let want = (1.0f64 + 0.5 / 100.0).powi(100);
        assert!((p.jacobian[100][0] - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_free_drift_is_an_error() {
        let b = noise(16, 4);
        let drift = DriftField::autonomous(Arc::new(crate::drift::SignPower { alpha: 0.5, cap: 1.0, dim: 1 }), 0.5);
        assert!(matches!(jacobian_flow(&drift, &b, 0, &[0.1]), Err(Error::GradientUnavailable(_))));
    }

    #[test]
    fn malliavin_trivial_cases() {
        let b = noise(128, 5);
        let grid = b.grid();
        let h = DiscretePath::from_fn(grid, |t| vec![t * t]).unwrap();
        let p = SdeProblem::from_noise_path(DriftField::zero(1), b.clone(), 0.5, vec![0.0]).unwrap();
        let d = malliavin_directional(&p, &h).unwrap();
        assert_eq!(d.values(), h.values());
        let zero = DiscretePath::from_fn(grid, |_| vec![0.0]).unwrap();
        let p = p.with_drift(smooth()).unwrap();
        assert!(malliavin_directional(&p, &zero).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn malliavin_matches_extrapolated_difference() {
        let b = noise(1024, 6);
        let grid = b.grid();
        let h = DiscretePath::from_fn(grid, |t| vec![t]).unwrap();
        let p = SdeProblem::from_noise_path(smooth(), b.clone(), 0.5, vec![0.3]).unwrap();
        let d = malliavin_directional(&p, &h).unwrap();
        let fd = |eps: f64| {
            let vals: Vec<Vec<f64>> = (0..b.len()).map(|i| vec![b.at(i)[0] + eps * h.at(i)[0]]).collect();
            let pb = p.with_noise(DiscretePath::new(grid, vals).unwrap()).unwrap();
            let x1 = super::super::solve_euler(&pb).unwrap().x;
            let x0 = super::super::solve_euler(&p).unwrap().x;
            (0..b.len()).map(|i| (x1.at(i)[0] - x0.at(i)[0]) / eps).collect::<Vec<f64>>()
        };
        let (e1, e2) = (1e-3, 1e-4);
        let (f1, f2) = (fd(e1), fd(e2));
        let err = (0..b.len()).map(|i| ((e1 * f2[i] - e2 * f1[i]) / (e1 - e2) - d.at(i)[0]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
}
