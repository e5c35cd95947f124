//! Transport and continuity equations solved along characteristics.
//!
//! Scalar lattices only. Characteristics are integrated with the Euler rule
//! of [`crate::sde`] in decomposition form, so zero and constant drifts
//! reproduce the closed forms on the lattice.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftField;
use crate::error::{invalid, Error, Result};
use crate::sde::OVERFLOW;
use crate::young::DiscretePath;

/// `u_t(x)` on a fixed lattice at a list of grid indices.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarFieldPath {
    pub times: Vec<usize>,
    pub dt: f64,
    pub lattice: Vec<f64>,
    /// `values[k][j] = u_{times[k]}(lattice[j])`
    pub values: Vec<Vec<f64>>,
}

/// Density path with its lattice mass at each stored time.
#[derive(Debug, Clone, Serialize)]
pub struct DensityPath {
    pub times: Vec<usize>,
    pub dt: f64,
    pub lattice: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

fn write_snapshots<W: Write>(mut w: W, times: &[usize], dt: f64, values: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "t,x_index,value")?;
    for (k, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            writeln!(w, "{:e},{j},{v:e}", times[k] as f64 * dt)?;
        }
    }
    Ok(())
}

impl ScalarFieldPath {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_snapshots(w, &self.times, self.dt, &self.values)
    }

    /// Lattice `W^{1,p}` seminorm `(sum |du/dx|^p dx)^(1/p)` at stored time `k`.
    pub fn sobolev_seminorm(&self, k: usize, p: f64) -> f64 {
        let u = &self.values[k];
        let s: f64 = self
            .lattice
            .windows(2)
            .zip(u.windows(2))
            .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs().powf(p) * (x[1] - x[0]))
            .sum();
        s.powf(1.0 / p)
    }
}

impl DensityPath {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_snapshots(w, &self.times, self.dt, &self.values)
    }

    /// Largest relative deviation of the mass from the first stored time.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| ((m - m0) / m0).abs()).fold(0.0, f64::max)
    }
}

/// Trapezoid rule on a (possibly nonuniform) lattice.
pub fn lattice_integral(lattice: &[f64], values: &[f64]) -> f64 {
    lattice.windows(2).zip(values.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum()
}

fn check_setup(drift: &DriftField, noise: &DiscretePath, lattice: &[f64], times: &[usize]) -> Result<()> {
    if drift.dim() != 1 || noise.dim() != 1 {
        return Err(Error::Dimension("characteristic solvers work on scalar lattices".into()));
    }
    if lattice.len() < 2 || lattice.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("lattice must be strictly increasing with at least two points"));
    }
    let n = noise.grid().n_steps();
    if times.is_empty() || times.iter().any(|&t| t > n) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("times must be increasing grid indices <= {n}")));
    }
    Ok(())
}

fn step_weight(drift: &DriftField, noise: &DiscretePath, i: usize) -> f64 {
    let g = noise.grid();
    drift.profile().integral(g.node(i), g.node(i + 1))
}

fn divergence(drift: &DriftField, x: f64) -> Result<f64> {
    drift.spatial().divergence(&[x]).ok_or_else(|| {
        Error::GradientUnavailable(format!("drift '{}' has no divergence; mollify it first", drift.name()))
    })
}

/// Backward characteristic from `(t, x)` to time 0:
/// `Y_i = x - (B_t - B_i) - D_i`, `D_i = D_{i+1} + w_i b(Y_{i+1})`.
/// Returns `Y_0` and, when `with_div`, `int_0^t div b(Y_r) dr` by the same rule.
fn backward_characteristic(drift: &DriftField, noise: &DiscretePath, t: usize, x: f64, with_div: bool) -> Result<(f64, f64)> {
    let bt = noise.at(t)[0];
    let (mut d, mut div) = (0.0, 0.0);
    let mut y = x;
    let mut out = [0.0];
    for i in (0..t).rev() {
        let w = step_weight(drift, noise, i);
        if w != 0.0 {
            drift.spatial().eval(&[y], &mut out);
            d += w * out[0];
            if with_div {
                div += w * divergence(drift, y)?;
            }
        }
        y = x - (bt - noise.at(i)[0]) - d;
        if !(y.abs() <= OVERFLOW) {
            return Err(Error::Overflow { step: i, value: y });
        }
    }
    Ok((y, div))
}

/// Forward characteristic from `(s, y)` to `t` with `int_s^t div b`.
fn forward_characteristic(drift: &DriftField, noise: &DiscretePath, s: usize, t: usize, y: f64) -> Result<(f64, f64)> {
    let bs = noise.at(s)[0];
    let (mut d, mut div) = (0.0, 0.0);
    let mut x = y;
    let mut out = [0.0];
    for i in s..t {
        let w = step_weight(drift, noise, i);
        if w != 0.0 {
            drift.spatial().eval(&[x], &mut out);
            d += w * out[0];
            div += w * divergence(drift, x)?;
        }
        x = y + (noise.at(i + 1)[0] - bs) + d;
        if !(x.abs() <= OVERFLOW) {
            return Err(Error::Overflow { step: i + 1, value: x });
        }
    }
    Ok((x, div))
}

/// `u_t(x) = u_0(Psi_{0<-t}(x))`, the inverse flow computed by integrating the
/// characteristic backwards along the frozen noise path.
pub fn solve_transport(
    u0: impl Fn(f64) -> f64 + Sync,
    drift: &DriftField,
    noise: &DiscretePath,
    lattice: &[f64],
    times: &[usize],
) -> Result<ScalarFieldPath> {
    check_setup(drift, noise, lattice, times)?;
    let values = times
        .iter()
        .map(|&t| lattice.par_iter().map(|&x| Ok(u0(backward_characteristic(drift, noise, t, x, false)?.0))).collect())
        .collect::<Result<_>>()?;
    Ok(ScalarFieldPath { times: times.to_vec(), dt: noise.grid().dt(), lattice: lattice.to_vec(), values })
}

fn density_from(values: Vec<Vec<f64>>, times: &[usize], dt: f64, lattice: &[f64]) -> Result<DensityPath> {
    for row in &values {
        if let Some((index, &value)) = row.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeDensity { index, value });
        }
    }
    let mass = values.iter().map(|v| lattice_integral(lattice, v)).collect::<Vec<f64>>();
    if mass.iter().any(|&m| !(m > 0.0)) {
        return Err(invalid("density has no mass on the lattice"));
    }
    Ok(DensityPath { times: times.to_vec(), dt, lattice: lattice.to_vec(), values, mass })
}

/// `rho_t(x) = rho_0(Psi_{0<-t}(x)) exp(-int_0^t div b(Psi_{r<-t}(x)) dr)`.
pub fn solve_continuity(
    rho0: impl Fn(f64) -> f64 + Sync,
    drift: &DriftField,
    noise: &DiscretePath,
    lattice: &[f64],
    times: &[usize],
) -> Result<DensityPath> {
    check_setup(drift, noise, lattice, times)?;
    let values = times
        .iter()
        .map(|&t| {
            lattice
                .par_iter()
                .map(|&x| {
                    let (y, div) = backward_characteristic(drift, noise, t, x, true)?;
                    Ok(rho0(y) * (-div).exp())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    density_from(values, times, noise.grid().dt(), lattice)
}

/// Backward continuity equation from terminal data at the last time:
/// `rho_t(y) = rho_T(Phi_{t->T}(y)) exp(int_t^T div b(Phi_{t->r}(y)) dr)`.
/// Paired with a forward transport solution, `<u_t, rho_t>` is constant in `t`.
pub fn solve_continuity_backward(
    rho_terminal: impl Fn(f64) -> f64 + Sync,
    drift: &DriftField,
    noise: &DiscretePath,
    lattice: &[f64],
    times: &[usize],
) -> Result<DensityPath> {
    check_setup(drift, noise, lattice, times)?;
    let big_t = *times.last().expect("times checked nonempty");
    let values = times
        .iter()
        .map(|&t| {
            lattice
                .par_iter()
                .map(|&y| {
                    let (x, div) = forward_characteristic(drift, noise, t, big_t, y)?;
                    Ok(rho_terminal(x) * div.exp())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    density_from(values, times, noise.grid().dt(), lattice)
}

/// `|<u_T, rho_T> - <u_0, rho_0>|` by lattice quadrature at the first and
/// last stored times.
pub fn duality_check(u: &ScalarFieldPath, rho: &DensityPath) -> Result<f64> {
    if u.lattice != rho.lattice || u.times != rho.times {
        return Err(Error::Dimension("transport and density paths must share lattice and times".into()));
    }
    let last = u.times.len() - 1;
    let pair = |k: usize| {
        let prod: Vec<f64> = u.values[k].iter().zip(&rho.values[k]).map(|(a, b)| a * b).collect();
        lattice_integral(&u.lattice, &prod)
    };
    Ok((pair(last) - pair(0)).abs())
}

/// Forward flow `Phi_{0->t}(x)` of the characteristic rule, for consistency checks.
pub fn forward_flow(drift: &DriftField, noise: &DiscretePath, t: usize, y: f64) -> Result<f64> {
    let b0 = noise.at(0)[0];
    let mut d = 0.0;
    let mut x = y;
    let mut out = [0.0];
    for i in 0..t {
        let w = step_weight(drift, noise, i);
        if w != 0.0 {
            drift.spatial().eval(&[x], &mut out);
            d += w * out[0];
        }
        x = y + (noise.at(i + 1)[0] - b0) + d;
        if !(x.abs() <= OVERFLOW) {
            return Err(Error::Overflow { step: i + 1, value: x });
        }
    }
    Ok(x)
}
