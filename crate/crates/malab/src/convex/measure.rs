use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ConvexGridFunction;
use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};

/// Per-node Monge-Ampere masses from a discrete Legendre transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MongeAmpereField {
    pub grid: GridSpec,
    pub mass: Vec<f64>,
    pub total: f64,
    pub slope_lo: Vec<f64>,
    pub slope_hi: Vec<f64>,
    pub resolution: usize,
}

impl MongeAmpereField {
    /// Sum of masses over a node subset.
    pub fn mass_of(&self, nodes: impl IntoIterator<Item = usize>) -> f64 {
        nodes.into_iter().map(|i| self.mass[i]).sum()
    }

    /// Mass of the nodes within distance `r` of `center`.
    pub fn mass_in_ball(&self, center: &[f64], r: f64) -> f64 {
        let dim = self.grid.dim;
        (0..self.grid.len())
            .filter(|&i| {
                let x = self.grid.point(i);
                (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>() <= r * r * (1.0 + 1e-12)
            })
            .map(|i| self.mass[i])
            .sum()
    }
}

fn slope_box(u: &ConvexGridFunction) -> (Vec<f64>, Vec<f64>) {
    let grid = u.grid();
    let dim = grid.dim;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for i in 0..grid.len() {
        if !u.in_domain(i) {
            continue;
        }
        for a in 0..dim {
            let mut d = [0i64; 3];
            d[a] = 1;
            if let Some(j) = grid.shift(i, d) {
                if u.in_domain(j) {
                    let q = (u.value(j) - u.value(i)) / grid.spacing[a];
                    lo[a] = lo[a].min(q);
                    hi[a] = hi[a].max(q);
                }
            }
        }
    }
    for a in 0..dim {
        if !lo[a].is_finite() {
            lo[a] = -1.0;
            hi[a] = 1.0;
        }
        let pad = 0.01 * (hi[a] - lo[a]) + 1e-3 * (1.0 + lo[a].abs().max(hi[a].abs()));
        lo[a] -= pad;
        hi[a] += pad;
    }
    (lo, hi)
}

/// Discrete Monge-Ampere measure: each cell of a uniform slope grid is assigned to the
/// node maximising `p.x - u(x)`; masses landing on boundary nodes are discarded.
pub fn ma_measure(u: &ConvexGridFunction, slope_resolution: usize) -> Result<MongeAmpereField> {
    let (lo, hi) = slope_box(u);
    ma_measure_on_box(u, slope_resolution, &lo, &hi)
}

/// As [`ma_measure`] with an explicit slope box. The box is widened when it misses
/// observed difference quotients.
pub fn ma_measure_on_box(u: &ConvexGridFunction, slope_resolution: usize, lo: &[f64], hi: &[f64]) -> Result<MongeAmpereField> {
    let grid = u.grid();
    let dim = grid.dim;
    if slope_resolution < 2 {
        return Err(MalabError::OutOfRange(format!("slope resolution {slope_resolution} < 2")));
    }
    let (need_lo, need_hi) = slope_box(u);
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    for a in 0..dim {
        if need_lo[a] < lo[a] || need_hi[a] > hi[a] {
            debug!("slope box axis {a} widened from [{}, {}] to [{}, {}]", lo[a], hi[a], need_lo[a].min(lo[a]), need_hi[a].max(hi[a]));
            lo[a] = lo[a].min(need_lo[a]);
            hi[a] = hi[a].max(need_hi[a]);
        }
    }
    let r = slope_resolution;
    let dp: Vec<f64> = (0..dim).map(|a| (hi[a] - lo[a]) / r as f64).collect();
    let counts = grid.counts3();

    let mut shape = counts;
    let mut vals: Vec<f64> = (0..grid.len())
        .map(|i| if u.in_domain(i) { -u.value(i) } else { f64::NEG_INFINITY })
        .collect();
    let mut args: Vec<u32> = (0..grid.len() as u32).collect();

    for a in (0..dim).rev() {
        let mut new_shape = shape;
        new_shape[a] = r;
        let new_len = new_shape.iter().product::<usize>();
        let old_strides = [shape[1] * shape[2], shape[2], 1];
        let new_strides = [new_shape[1] * new_shape[2], new_shape[2], 1];
        let (x0, hx) = (grid.origin[a], grid.spacing[a]);
        let n_a = shape[a];
        let p0 = lo[a] + 0.5 * dp[a];
        let dpa = dp[a];
        let results: Vec<(f64, u32)> = (0..new_len)
            .into_par_iter()
            .map(|flat| {
                let m = [flat / new_strides[0], (flat / new_strides[1]) % new_shape[1], flat % new_shape[2]];
                let pv = p0 + m[a] as f64 * dpa;
                let mut base = 0;
                for b in 0..3 {
                    if b != a {
                        base += m[b] * old_strides[b];
                    }
                }
                let mut best = f64::NEG_INFINITY;
                let mut barg = u32::MAX;
                for k in 0..n_a {
                    let idx = base + k * old_strides[a];
                    let v = vals[idx];
                    if v == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = pv * (x0 + k as f64 * hx) + v;
                    if cand > best {
                        best = cand;
                        barg = args[idx];
                    }
                }
                (best, barg)
            })
            .collect();
        vals = results.iter().map(|r| r.0).collect();
        args = results.iter().map(|r| r.1).collect();
        shape = new_shape;
    }

    let cell: f64 = dp.iter().product();
    let mut mass = vec![0.0; grid.len()];
    for &node in &args {
        if node != u32::MAX && u.kind(node as usize) == NodeKind::Interior {
            mass[node as usize] += cell;
        }
    }
    let total = mass.iter().sum();
    Ok(MongeAmpereField {
        grid: grid.clone(),
        mass,
        total,
        slope_lo: lo,
        slope_hi: hi,
        resolution: r,
    })
}
