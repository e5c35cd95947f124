use std::io::Write;

use crate::error::{Error, Result};
use crate::fbm::{FbmPath, TimeGrid};

/// Values in `R^m` on the nodes of a grid, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<Vec<f64>>,
}

impl DiscretePath {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.n_steps() + 1 {
            return Err(Error::Dimension(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.n_steps() + 1
            )));
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("path values must share a positive dimension".into()));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// The fBm values as a path.
    pub fn from_fbm(b: &FbmPath) -> Self {
        let n = b.grid().n_steps();
        Self { grid: b.grid(), dim: b.dim(), values: (0..=n).map(|i| b.value(i)).collect() }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i]
    }
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
    pub fn last(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    /// `f_t - f_s`.
    pub fn increment(&self, s: usize, t: usize) -> Vec<f64> {
        self.values[t].iter().zip(&self.values[s]).map(|(a, b)| a - b).collect()
    }

    /// `max_i |f_i|` (Euclidean norm per node).
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    /// `max_i |f_i - g_i|`.
    pub fn sup_distance(&self, other: &DiscretePath) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| f(v)).collect())
    }

    /// CSV with columns `t, <prefix>_1..`.
    pub fn write_csv<W: Write>(&self, mut w: W, prefix: &str) -> std::io::Result<()> {
        let cols: Vec<String> = (1..=self.dim).map(|c| format!("{prefix}_{c}")).collect();
        writeln!(w, "t,{}", cols.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let vals: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{:e},{}", self.grid.node(i), vals.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
