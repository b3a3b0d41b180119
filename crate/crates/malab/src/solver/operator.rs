//! Wide-stencil discretisation of `det D^2 u`.

use rayon::prelude::*;

use crate::convex::ConvexGridFunction;
use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};
use crate::stencil::{convexity_directions, orthogonal_frames, primitive_directions};

/// Directions, orthogonal frames and squared physical lengths for one grid.
///
/// `frames[guard_start..]` are one-direction guards, one per convexity direction. Near
/// corners a convexity direction can lie in no complete frame (the space diagonal needs
/// radius-2 partners); there its guard joins the minimum, so the equation still forces
/// convexity along it.
#[derive(Debug, Clone)]
pub struct StencilPlan {
    pub radius: i64,
    pub dirs: Vec<[i64; 3]>,
    pub frames: Vec<Vec<usize>>,
    pub guard_start: usize,
    pub len2: Vec<f64>,
}

impl StencilPlan {
    /// Frames are orthogonal in index space, so multi-dimensional grids need equal spacing.
    pub fn new(grid: &GridSpec, radius: i64) -> Result<Self> {
        if radius < 1 {
            return Err(MalabError::OutOfRange(format!("stencil radius {radius} < 1")));
        }
        let h0 = grid.spacing[0];
        if grid.spacing.iter().any(|h| (h - h0).abs() > 1e-12 * h0) {
            return Err(MalabError::InvalidGrid("wide stencils need equal spacing on every axis".into()));
        }
        let dirs = primitive_directions(grid.dim, radius);
        let mut frames = orthogonal_frames(grid.dim, &dirs);
        let guard_start = frames.len();
        for e in convexity_directions(grid.dim) {
            frames.push(vec![dirs.iter().position(|d| *d == e).expect("radius >= 1 holds the convexity directions")]);
        }
        let len2 = dirs.iter().map(|e| (0..grid.dim).map(|a| (e[a] as f64 * grid.spacing[a]).powi(2)).sum()).collect();
        Ok(StencilPlan { radius, dirs, frames, guard_start, len2 })
    }
}

/// Second difference along direction `k` at node `i` and its two neighbours, when both
/// lie in the domain.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Diff {
    pub value: f64,
    pub plus: usize,
    pub minus: usize,
    pub inv_len2: f64,
}

pub(crate) fn differences(grid: &GridSpec, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], i: usize) -> Vec<Option<Diff>> {
    plan.dirs
        .iter()
        .zip(&plan.len2)
        .map(|(e, l2)| {
            let plus = grid.shift(i, *e)?;
            let minus = grid.shift(i, [-e[0], -e[1], -e[2]])?;
            if !kinds[plus].in_domain() || !kinds[minus].in_domain() {
                return None;
            }
            Some(Diff {
                value: (vals[plus] + vals[minus] - 2.0 * vals[i]) / l2,
                plus,
                minus,
                inv_len2: 1.0 / l2,
            })
        })
        .collect()
}

/// `prod max(D, 0)`.
fn frame_product(d: &[f64]) -> f64 {
    d.iter().map(|x| x.max(0.0)).product()
}

/// Weight bound `M` of the concave form: weights lie in `[1/M, M]`.
pub(crate) const WEIGHT_BOUND: f64 = 1e10;

/// Concave, monotone form of `(prod D)^{1/n}`: the minimum over weights `a` in
/// `[1/M, M]^n` with `prod a = 1` of `(1/n) sum a_k D_k`. Equals the geometric mean of
/// positive `D` whose ratios stay within the bounds; writes the minimising weights.
pub(crate) fn concave_mean(d: &[f64], a: &mut [f64]) -> f64 {
    let n = d.len();
    let (lo_w, hi_w) = (1.0 / WEIGHT_BOUND, WEIGHT_BOUND);
    if d.iter().all(|&x| x > 0.0) {
        let gm = (d.iter().map(|x| x.ln()).sum::<f64>() / n as f64).exp();
        for k in 0..n {
            a[k] = gm / d[k];
        }
        if a.iter().all(|&w| (lo_w..=hi_w).contains(&w)) {
            return gm;
        }
    }
    let weights_at = |ln_lambda: f64, a: &mut [f64]| {
        let mut s = 0.0;
        for k in 0..n {
            a[k] = if d[k] > 0.0 { (ln_lambda - d[k].ln()).exp().clamp(lo_w, hi_w) } else { hi_w };
            s += a[k].ln();
        }
        s
    };
    let pos: Vec<f64> = d.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.is_empty() {
        a.iter_mut().for_each(|w| *w = hi_w);
    } else {
        let min_ln = pos.iter().fold(f64::INFINITY, |m, x| m.min(x.ln()));
        let max_ln = pos.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.ln()));
        let (mut lo, mut hi) = (min_ln + lo_w.ln() - 1.0, max_ln + hi_w.ln() + 1.0);
        if weights_at(lo, a) < 0.0 {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if weights_at(mid, a) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            weights_at(hi, a);
        }
    }
    a.iter().zip(d).map(|(w, x)| w * x).sum::<f64>() / n as f64
}

/// Minimum over complete frames at node `i` of the product (or, with `concave`, of
/// [`concave_mean`]), and over the guards of uncovered convexity directions of
/// `(M D)^n` (or `M D`): (value, frame index, weights of that frame, differences).
pub(crate) fn node_value(grid: &GridSpec, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], i: usize, concave: bool) -> (f64, usize, [f64; 3], Vec<Option<Diff>>) {
    let diffs = differences(grid, kinds, plan, vals, i);
    let mut best = f64::INFINITY;
    let mut arg = usize::MAX;
    let mut best_w = [0.0; 3];
    let mut buf = [0.0; 3];
    let mut w = [0.0; 3];
    let mut covered = vec![false; plan.dirs.len()];
    for (fi, fr) in plan.frames[..plan.guard_start].iter().enumerate() {
        let mut complete = true;
        for (s, &k) in fr.iter().enumerate() {
            match diffs[k] {
                Some(d) => buf[s] = d.value,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            continue;
        }
        fr.iter().for_each(|&k| covered[k] = true);
        let m = fr.len();
        let v = if concave { concave_mean(&buf[..m], &mut w[..m]) } else { frame_product(&buf[..m]) };
        if v < best {
            best = v;
            arg = fi;
            best_w = w;
        }
    }
    for (fi, fr) in plan.frames.iter().enumerate().skip(plan.guard_start) {
        let k = fr[0];
        let Some(d) = diffs[k].filter(|_| !covered[k]) else { continue };
        let v = if concave { WEIGHT_BOUND * d.value } else { (WEIGHT_BOUND * d.value.max(0.0)).powi(grid.dim as i32) };
        if v < best {
            best = v;
            arg = fi;
            best_w = [WEIGHT_BOUND, 0.0, 0.0];
        }
    }
    (best, arg, best_w, diffs)
}

/// Operator values over all nodes (NaN off the interior).
pub(crate) fn operator_field(grid: &GridSpec, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], concave: bool) -> Vec<f64> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if kinds[i] != NodeKind::Interior {
                f64::NAN
            } else {
                node_value(grid, kinds, plan, vals, i, concave).0
            }
        })
        .collect()
}

/// Rounding floor of the product at node `i`: first-order effect of an `8 eps` relative
/// error in every nodal value entering the active frame.
pub(crate) fn rounding_floor(grid: &GridSpec, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], i: usize) -> f64 {
    let (_, fi, _, diffs) = node_value(grid, kinds, plan, vals, i, false);
    if fi == usize::MAX {
        return 0.0;
    }
    let ds: Vec<Diff> = plan.frames[fi].iter().map(|&k| diffs[k].expect("active frame is complete")).collect();
    if fi >= plan.guard_start {
        let d = ds[0];
        let err = 8.0 * f64::EPSILON * (vals[d.plus].abs() + vals[d.minus].abs() + 2.0 * vals[i].abs()) * d.inv_len2;
        let n = grid.dim as i32;
        return n as f64 * WEIGHT_BOUND.powi(n) * d.value.max(0.0).powi(n - 1) * err;
    }
    let mut floor = 0.0;
    for (s, d) in ds.iter().enumerate() {
        let others: f64 = ds.iter().enumerate().filter(|(t, _)| *t != s).map(|(_, e)| e.value.max(0.0)).product();
        let err = 8.0 * f64::EPSILON * (vals[d.plus].abs() + vals[d.minus].abs() + 2.0 * vals[i].abs()) * d.inv_len2;
        floor += others * err;
    }
    floor
}

/// Row of the derivative of the concave form at node `i` over full-grid node indices.
pub(crate) fn jacobian_row(grid: &GridSpec, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], i: usize) -> (f64, Vec<(usize, f64)>) {
    let (value, fi, w, diffs) = node_value(grid, kinds, plan, vals, i, true);
    let fr = &plan.frames[fi];
    let m = fr.len() as f64;
    let mut row = Vec::with_capacity(2 * fr.len() + 1);
    let mut diag = 0.0;
    for (s, &k) in fr.iter().enumerate() {
        let d = diffs[k].expect("active frame is complete");
        let c = w[s] / m * d.inv_len2;
        row.push((d.plus, c));
        row.push((d.minus, c));
        diag -= 2.0 * c;
    }
    row.push((i, diag));
    (value, row)
}

/// Discrete Monge-Ampere operator: minimum over complete orthogonal frames of the
/// product of positive parts of the second differences. NaN off the interior.
pub fn discrete_ma_operator(u: &ConvexGridFunction, stencil_radius: i64) -> Result<Vec<f64>> {
    let plan = StencilPlan::new(u.grid(), stencil_radius)?;
    Ok(operator_field(u.grid(), u.kinds(), &plan, u.values(), false))
}

/// `discrete_ma_operator(u) - f` at interior nodes.
pub fn ma_residual(u: &ConvexGridFunction, f: &[f64], stencil_radius: i64) -> Result<Vec<f64>> {
    if f.len() != u.grid().len() {
        return Err(MalabError::SizeMismatch {
            expected: u.grid().len(),
            found: f.len(),
        });
    }
    Ok(discrete_ma_operator(u, stencil_radius)?.iter().zip(f).map(|(a, b)| a - b).collect())
}
