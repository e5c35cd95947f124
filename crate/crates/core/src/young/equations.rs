use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::path::{norm, DiscretePath};
use super::pvar::{p_variation, PVarMethod};
use crate::error::{invalid, Error, Result};
use crate::fbm::TimeGrid;

const BLOW_UP: f64 = 1e12;

fn matrix_dim(a: &DiscretePath) -> Result<usize> {
    let m = (a.dim() as f64).sqrt().round() as usize;
    if m * m != a.dim() {
        return Err(Error::Dimension(format!("matrix path has {} entries per node", a.dim())));
    }
    Ok(m)
}

/// Cayley step `(I - dA/2)^{-1} (I + dA/2)` for the increment `dA`.
fn step_matrices(a: &DiscretePath, m: usize, i: usize) -> Result<(DMatrix<f64>, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> {
    let da = DMatrix::from_row_slice(m, m, &a.increment(i, i + 1));
    let id = DMatrix::<f64>::identity(m, m);
    let plus = &id + &da * 0.5;
    let minus = &id - &da * 0.5;
    let lu = minus.lu();
    if !lu.is_invertible() {
        return Err(Error::Sewing(format!("singular implicit step at node {i}")));
    }
    Ok((plus, lu))
}

/// A posteriori data for the affine Young estimate
/// `sup|x| + [[x]]_{p~} <= C exp(C [[A]]_p^p) (|x0| + [[z]]_{p~})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungBound {
    pub sup_norm: f64,
    pub x_variation: f64,
    pub a_variation: f64,
    pub z_variation: f64,
    /// `[[A]]_{p-var}^p`.
    pub a_power: f64,
    /// `sup|x| + [[x]]_{p~-var}`.
    pub lhs: f64,
    /// `|x0| + [[z]]_{p~-var}`.
    pub data: f64,
    /// Smallest `C >= 1` with `lhs <= C exp(C a_power) data`.
    pub measured_constant: f64,
    /// Whether any variation was only bounded from below (greedy mode).
    pub greedy: bool,
}

impl YoungBound {
    fn measure(lhs: f64, data: f64, a_power: f64) -> f64 {
        if data <= 0.0 {
            return 1.0;
        }
        let ratio = lhs / data;
        let f = |c: f64| c.ln() + c * a_power - ratio.ln();
        if f(1.0) >= 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (1.0, 2.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

#[derive(Debug, Clone)]
pub struct AffineSolution {
    pub path: DiscretePath,
    pub bound: YoungBound,
}

/// Solve `dx = dA x + dz` with the trapezoid germ (implicit midpoint rule).
///
/// `a` holds row-major `m x m` matrices, `z` and `x0` are `m`-vectors.
pub fn solve_affine_young(a: &DiscretePath, z: &DiscretePath, x0: &[f64], p: f64, p_tilde: f64) -> Result<AffineSolution> {
    let m = matrix_dim(a)?;
    if z.dim() != m || x0.len() != m || z.len() != a.len() {
        return Err(Error::Dimension("A, z and x0 do not match".into()));
    }
    if !(1.0..2.0).contains(&p) || 1.0 / p + 1.0 / p_tilde <= 1.0 {
        return Err(invalid(format!("affine Young equation needs p < 2 and 1/p + 1/p~ > 1 (p={p}, p~={p_tilde})")));
    }
    // Write x = x0 + z + y; then dy = dA x with y_0 = 0, so A = 0 gives
    // x = x0 + z to the last bit.
    let n = a.len() - 1;
    let base = |i: usize| DVector::from_iterator(m, x0.iter().zip(z.at(i)).map(|(u, v)| u + v));
    let mut y = DVector::<f64>::zeros(m);
    let mut x = base(0);
    let mut out = Vec::with_capacity(n + 1);
    out.push(x.as_slice().to_vec());
    for i in 0..n {
        let da = DMatrix::from_row_slice(m, m, &a.increment(i, i + 1));
        let c_next = base(i + 1);
        let lhs = DMatrix::<f64>::identity(m, m) - &da * 0.5;
        let rhs = &y + &da * (&x + &c_next) * 0.5;
        y = lhs.lu().solve(&rhs).ok_or_else(|| Error::Sewing(format!("singular implicit step at node {i}")))?;
        x = c_next + &y;
        let size = x.norm();
        if !size.is_finite() || size > BLOW_UP {
            return Err(Error::Overflow { step: i + 1, value: size });
        }
        out.push(x.as_slice().to_vec());
    }
    let path = DiscretePath::new(a.grid(), out)?;
    let vx = p_variation(&path, p_tilde, PVarMethod::Auto)?;
    let va = p_variation(a, p, PVarMethod::Auto)?;
    let vz = p_variation(z, p_tilde, PVarMethod::Auto)?;
    let sup_norm = path.sup_norm();
    let lhs = sup_norm + vx.value;
    let data = norm(x0) + vz.value;
    let a_power = va.value.powf(p);
    let bound = YoungBound {
        sup_norm,
        x_variation: vx.value,
        a_variation: va.value,
        z_variation: vz.value,
        a_power,
        lhs,
        data,
        measured_constant: YoungBound::measure(lhs, data, a_power),
        greedy: [vx.method, va.method, vz.method].contains(&PVarMethod::Greedy),
    };
    Ok(AffineSolution { path, bound })
}

/// Product of the one-step solution maps: the Jacobian `x0 -> x_n` of the
/// homogeneous equation, row-major.
pub fn linear_flow_matrix(a: &DiscretePath) -> Result<Vec<f64>> {
    let m = matrix_dim(a)?;
    let mut j = DMatrix::<f64>::identity(m, m);
    for i in 0..a.len() - 1 {
        let (plus, lu) = step_matrices(a, m, i)?;
        j = lu.solve(&(plus * j)).ok_or_else(|| Error::Sewing(format!("singular implicit step at node {i}")))?;
    }
    Ok(j.transpose().as_slice().to_vec())
}

/// Matrix path `A~_t = A_{tau - t}` on the same grid.
pub fn reversed(a: &DiscretePath) -> Result<DiscretePath> {
    let mut v = a.values().to_vec();
    v.reverse();
    DiscretePath::new(a.grid(), v)
}

/// Solve the time-reversed homogeneous equation driven by `A~_t = A_{tau - t}`
/// from the terminal value; the last node approximates the initial value of
/// the forward problem.
pub fn reverse_linear_flow(a: &DiscretePath, terminal: &[f64]) -> Result<DiscretePath> {
    let rev = reversed(a)?;
    let m = matrix_dim(a)?;
    let zero = DiscretePath::new(a.grid(), vec![vec![0.0; m]; a.len()])?;
    // the bound is irrelevant here; use p = 1 bookkeeping
    Ok(solve_affine_young(&rev, &zero, terminal, 1.0, 1.0)?.path)
}

/// Two-parameter field `A_{s,t}(x)` on grid indices.
pub trait TwoParamField: Sync {
    fn dim(&self) -> usize;
    fn grid(&self) -> TimeGrid;
    fn increment(&self, s: usize, t: usize, x: &[f64], out: &mut [f64]);
}

/// Solve `y_t = y_0 + int A_{ds}(y_s)` with the germ
/// `(A_{s,t}(y_s) + A_{s,t}(y_s + A_{s,t}(y_s))) / 2`, which differs from
/// `A_{s,t}(y_s)` by `o(|t-s|)` when `(1 + eta)/p > 1`.
pub fn solve_nonlinear_yde(field: &dyn TwoParamField, y0: &[f64]) -> Result<DiscretePath> {
    let d = field.dim();
    if y0.len() != d {
        return Err(Error::Dimension("initial value does not match the field".into()));
    }
    let grid = field.grid();
    let n = grid.n_steps();
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(n + 1);
    out.push(y.clone());
    let (mut a1, mut a2, mut pred) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for i in 0..n {
        field.increment(i, i + 1, &y, &mut a1);
        for k in 0..d {
            pred[k] = y[k] + a1[k];
        }
        field.increment(i, i + 1, &pred, &mut a2);
        for k in 0..d {
            y[k] += 0.5 * (a1[k] + a2[k]);
        }
        let size = norm(&y);
        if !size.is_finite() || size > BLOW_UP {
            return Err(Error::Overflow { step: i + 1, value: size });
        }
        out.push(y.clone());
    }
    DiscretePath::new(grid, out)
}

/// `max_j |y_{s,t} - A_{s,t}(y_s)|` over aligned windows of `2^k` steps, for
/// each `k` in `levels`; returns `(window length in time, max remainder)`.
pub fn remainder_profile(field: &dyn TwoParamField, y: &DiscretePath, levels: &[u32]) -> Vec<(f64, f64)> {
    let d = field.dim();
    let grid = field.grid();
    let n = grid.n_steps();
    let mut a = vec![0.0; d];
    levels
        .iter()
        .filter(|&&k| (1usize << k) <= n)
        .map(|&k| {
            let w = 1usize << k;
            let mut worst = 0.0_f64;
            let mut s = 0;
            while s + w <= n {
                field.increment(s, s + w, y.at(s), &mut a);
                let r: f64 = (0..d).map(|c| (y.at(s + w)[c] - y.at(s)[c] - a[c]).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(r);
                s += w;
            }
            (w as f64 * grid.dt(), worst)
        })
        .collect()
}
