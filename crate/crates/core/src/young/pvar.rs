use serde::{Deserialize, Serialize};

use super::path::DiscretePath;
use crate::error::{invalid, Result};

/// Largest number of grid steps handled by the exact O(n^2) algorithm.
pub const EXACT_PVAR_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PVarMethod {
    /// Exact when the range has at most [`EXACT_PVAR_LIMIT`] steps, greedy otherwise.
    Auto,
    ExactDp,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PVarResult {
    /// `[[f]]_{p-var}`.
    pub value: f64,
    /// Indices of the optimal (exact) or chosen (greedy) partition.
    pub partition: Vec<usize>,
    /// Method actually used; greedy values are lower bounds.
    pub method: PVarMethod,
}

fn dist(path: &DiscretePath, i: usize, j: usize) -> f64 {
    path.at(i).iter().zip(path.at(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

pub fn p_variation(path: &DiscretePath, p: f64, method: PVarMethod) -> Result<PVarResult> {
    p_variation_range(path, p, 0, path.len() - 1, method)
}

/// p-variation of the path restricted to nodes `s..=t`.
pub fn p_variation_range(path: &DiscretePath, p: f64, s: usize, t: usize, method: PVarMethod) -> Result<PVarResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p-variation needs finite p >= 1, got {p}")));
    }
    if s > t || t >= path.len() {
        return Err(invalid(format!("bad node range {s}..={t}")));
    }
    if s == t {
        return Ok(PVarResult { value: 0.0, partition: vec![s], method: PVarMethod::ExactDp });
    }
    let exact = match method {
        PVarMethod::Greedy => false,
        _ => t - s <= EXACT_PVAR_LIMIT,
    };
    if exact {
        Ok(exact_dp(path, p, s, t))
    } else {
        Ok(greedy(path, p, s, t))
    }
}

fn exact_dp(path: &DiscretePath, p: f64, s: usize, t: usize) -> PVarResult {
    let m = t - s + 1;
    let mut best = vec![0.0_f64; m];
    let mut prev = vec![0usize; m];
    for j in 1..m {
        let (mut bv, mut bi) = (f64::NEG_INFINITY, 0);
        for i in 0..j {
            let v = best[i] + dist(path, s + i, s + j).powf(p);
            if v > bv {
                bv = v;
                bi = i;
            }
        }
        best[j] = bv;
        prev[j] = bi;
    }
    let mut partition = vec![t];
    let mut j = m - 1;
    while j > 0 {
        j = prev[j];
        partition.push(s + j);
    }
    partition.reverse();
    PVarResult { value: best[m - 1].powf(1.0 / p), partition, method: PVarMethod::ExactDp }
}

/// Drop interior points while merging neighbours does not lower the sum.
/// Any partition gives a lower bound, so this never overestimates.
fn greedy(path: &DiscretePath, p: f64, s: usize, t: usize) -> PVarResult {
    let mut pts: Vec<usize> = (s..=t).collect();
    loop {
        let mut kept = Vec::with_capacity(pts.len());
        kept.push(pts[0]);
        let mut changed = false;
        let mut k = 1;
        while k + 1 < pts.len() {
            let (a, b, c) = (*kept.last().unwrap(), pts[k], pts[k + 1]);
            if dist(path, a, c).powf(p) >= dist(path, a, b).powf(p) + dist(path, b, c).powf(p) {
                changed = true;
            } else {
                kept.push(b);
            }
            k += 1;
        }
        kept.push(*pts.last().unwrap());
        pts = kept;
        if !changed {
            break;
        }
    }
    let sum: f64 = pts.windows(2).map(|w| dist(path, w[0], w[1]).powf(p)).sum();
    PVarResult { value: sum.powf(1.0 / p), partition: pts, method: PVarMethod::Greedy }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::TimeGrid;
    use proptest::prelude::*;

    fn scalar(v: Vec<f64>) -> DiscretePath {
        let g = TimeGrid::unit(v.len() - 1).unwrap();
        DiscretePath::scalar(g, v).unwrap()
    }

    /// Enumerate all 2^(n-2) partitions.
    pub(crate) fn brute_force(v: &[f64], p: f64) -> f64 {
        let n = v.len();
        let mut best = 0.0_f64;
        for mask in 0u32..(1 << (n - 2)) {
            let mut last = 0;
            let mut sum = 0.0;
            for k in 1..n {
                if k == n - 1 || mask & (1 << (k - 1)) != 0 {
                    sum += (v[k] - v[last]).abs().powf(p);
                    last = k;
                }
            }
            best = best.max(sum);
        }
        best.powf(1.0 / p)
    }

    #[test]
    fn identity_path_single_interval() {
        let g = TimeGrid::unit(50).unwrap();
        let path = DiscretePath::from_fn(g, |t| vec![t]).unwrap();
        let r = p_variation(&path, 2.0, PVarMethod::ExactDp).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.partition, vec![0, 50]);
    }

    #[test]
    fn monotone_path_total_increase() {
        let path = scalar(vec![0.0, 0.1, 0.5, 0.6, 2.0]);
        let r = p_variation(&path, 1.0, PVarMethod::Auto).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn long_paths_fall_back_to_greedy() {
        let v: Vec<f64> = (0..=3000).map(|i| (f64::from(i) * 0.37).sin()).collect();
        let r = p_variation(&scalar(v), 2.0, PVarMethod::Auto).unwrap();
        assert_eq!(r.method, PVarMethod::Greedy);
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(v in proptest::collection::vec(-1.0..1.0f64, 8), p in 1.0..3.0f64) {
            let r = p_variation(&scalar(v.clone()), p, PVarMethod::ExactDp).unwrap();
            let b = brute_force(&v, p);
            prop_assert!((r.value - b).abs() <= 1e-12 * b.max(1.0));
        }

        #[test]
        fn greedy_is_lower_bound(v in proptest::collection::vec(-1.0..1.0f64, 2..40), p in 1.0..3.0f64) {
            let path = scalar(v);
            let e = p_variation(&path, p, PVarMethod::ExactDp).unwrap().value;
            let g = p_variation(&path, p, PVarMethod::Greedy).unwrap().value;
            prop_assert!(g <= e * (1.0 + 1e-12));
        }

        #[test]
        fn pvar_control_is_superadditive(v in proptest::collection::vec(-1.0..1.0f64, 12), a in 0usize..11, b in 0usize..11, c in 0usize..11) {
            let mut idx = [a, b, c];
            idx.sort();
            let path = scalar(v);
            let w = |s, t| p_variation_range(&path, 1.5, s, t, PVarMethod::ExactDp).unwrap().value.powf(1.5);
            prop_assert!(w(idx[0], idx[1]) + w(idx[1], idx[2]) <= w(idx[0], idx[2]) + 1e-12);
        }

        #[test]
        fn holder_bounds_variation(v in proptest::collection::vec(-1.0..1.0f64, 3..30), gamma in 0.3..1.0f64) {
            // [[f]]_{1/gamma-var} <= w(0,1)^gamma sup |f_st| / w(s,t)^gamma, w(s,t) = t - s
            let n = v.len() - 1;
            let path = scalar(v.clone());
            let dt = 1.0 / n as f64;
            let mut holder = 0.0_f64;
            for s in 0..n {
                for t in s + 1..=n {
                    holder = holder.max((v[t] - v[s]).abs() / ((t - s) as f64 * dt).powf(gamma));
                }
            }
            let var = p_variation(&path, 1.0 / gamma, PVarMethod::ExactDp).unwrap().value;
            prop_assert!(var <= holder * (1.0 + 1e-12));
        }
    }
}
