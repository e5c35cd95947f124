//! The averaged field `(T b)_t(x) = int_0^t b_r(B_r + x) dr` on a spatial lattice.

use rayon::prelude::*;

use crate::drift::DriftField;
use crate::error::{invalid, Error, Result};
use crate::fbm::TimeGrid;
use crate::young::{DiscretePath, TwoParamField};

/// Tabulated averaged field for a scalar drift. Between lattice points the
/// field is interpolated linearly; outside the lattice the end values are held.
#[derive(Debug, Clone)]
pub struct AveragedField {
    grid: TimeGrid,
    lattice: Vec<f64>,
    /// `table[j][i] = (T b)_{t_i}(x_j)`
    table: Vec<Vec<f64>>,
}

/// Tabulate `T b` along `noise` at the points of `lattice` (strictly increasing).
///
/// Each time step integrates the time factor exactly against the linear
/// interpolation of `r -> g(B_r + x)` between the step's end points.
pub fn averaged_field(b: &DriftField, noise: &DiscretePath, lattice: &[f64]) -> Result<AveragedField> {
    if b.dim() != 1 || noise.dim() != 1 {
        return Err(Error::Dimension("averaged fields are tabulated for scalar drifts only".into()));
    }
    if lattice.len() < 2 || lattice.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("lattice must have at least two strictly increasing points"));
    }
    let grid = noise.grid();
    let n = grid.n_steps();
    let weights: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (a, c) = (grid.node(i), grid.node(i + 1));
            let w = b.profile().integral(a, c);
            let wr = b.profile().first_moment(a, c) / (c - a);
            (w - wr, wr)
        })
        .collect();
    let spatial = b.spatial();
    let table = lattice
        .par_iter()
        .map(|&x| {
            let mut g = vec![0.0; n + 1];
            let mut out = [0.0];
            for (i, gi) in g.iter_mut().enumerate() {
                spatial.eval(&[noise.at(i)[0] + x], &mut out);
                if !out[0].is_finite() {
                    return Err(Error::Quadrature(format!("drift is not finite at x = {}", noise.at(i)[0] + x)));
                }
                *gi = out[0];
            }
            let mut acc = 0.0;
            let mut col = Vec::with_capacity(n + 1);
            col.push(0.0);
            for (i, &(wl, wr)) in weights.iter().enumerate() {
                acc += wl * g[i] + wr * g[i + 1];
                col.push(acc);
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedField { grid, lattice: lattice.to_vec(), table })
}

impl AveragedField {
    pub fn lattice(&self) -> &[f64] {
        &self.lattice
    }

    /// `(T b)_{t_i}(x_j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.table[j][i]
    }

    /// The time path `t -> (T b)_t(x_j)`.
    pub fn time_path(&self, j: usize) -> Result<DiscretePath> {
        DiscretePath::scalar(self.grid, self.table[j].clone())
    }

    /// `max |T b_{s,t}(x) - T b_{s,t}(y)| / |x - y|` over adjacent lattice pairs.
    pub fn spatial_lipschitz(&self, s: usize, t: usize) -> f64 {
        self.lattice
            .windows(2)
            .zip(self.table.windows(2))
            .map(|(x, col)| {
                let dx = (col[1][t] - col[1][s]) - (col[0][t] - col[0][s]);
                dx.abs() / (x[1] - x[0])
            })
            .fold(0.0, f64::max)
    }

    fn interpolate(&self, i: usize, x: f64) -> f64 {
        let lat = &self.lattice;
        if x <= lat[0] {
            return self.table[0][i];
        }
        if x >= lat[lat.len() - 1] {
            return self.table[lat.len() - 1][i];
        }
        let k = lat.partition_point(|&v| v <= x) - 1;
        let u = (x - lat[k]) / (lat[k + 1] - lat[k]);
        (1.0 - u) * self.table[k][i] + u * self.table[k + 1][i]
    }
}

impl TwoParamField for AveragedField {
    fn dim(&self) -> usize {
        1
    }
    fn grid(&self) -> TimeGrid {
        self.grid
    }
    fn increment(&self, s: usize, t: usize, x: &[f64], out: &mut [f64]) {
        out[0] = self.interpolate(t, x[0]) - self.interpolate(s, x[0]);
    }
}
