use log::{debug, warn};

use super::ConvexGridFunction;
use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};
use crate::stencil::convexity_directions;

#[derive(Debug, Clone, PartialEq)]
pub struct StencilViolation {
    pub node: usize,
    pub direction: [i64; 3],
    pub second_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityCheck {
    pub convex: bool,
    pub violation: Option<StencilViolation>,
}

fn direction_length_sq(grid: &GridSpec, e: &[i64; 3]) -> f64 {
    (0..grid.dim).map(|a| (e[a] as f64 * grid.spacing[a]).powi(2)).sum()
}

/// Checks every centred second difference along the axis and diagonal directions.
/// Reports the first violating stencil in node order.
pub fn is_discretely_convex(u: &ConvexGridFunction, tol_convex: f64) -> ConvexityCheck {
    let grid = u.grid();
    let dirs = convexity_directions(grid.dim);
    let lens: Vec<f64> = dirs.iter().map(|e| direction_length_sq(grid, e)).collect();
    for i in 0..grid.len() {
        if !u.in_domain(i) {
            continue;
        }
        for (e, len2) in dirs.iter().zip(&lens) {
            let fwd = grid.shift(i, *e);
            let bwd = grid.shift(i, [-e[0], -e[1], -e[2]]);
            if let (Some(f), Some(b)) = (fwd, bwd) {
                if u.in_domain(f) && u.in_domain(b) {
                    let d2 = (u.value(f) - 2.0 * u.value(i) + u.value(b)) / len2;
                    if d2 < -tol_convex {
                        return ConvexityCheck {
                            convex: false,
                            violation: Some(StencilViolation {
                                node: i,
                                direction: *e,
                                second_difference: d2,
                            }),
                        };
                    }
                }
            }
        }
    }
    ConvexityCheck {
        convex: true,
        violation: None,
    }
}

/// Maximal runs of in-domain nodes along direction `e`.
pub(crate) fn grid_lines(grid: &GridSpec, kinds: &[NodeKind], e: &[i64; 3]) -> Vec<Vec<usize>> {
    let back = [-e[0], -e[1], -e[2]];
    let mut lines = Vec::new();
    for i in 0..grid.len() {
        if !kinds[i].in_domain() {
            continue;
        }
        let starts = match grid.shift(i, back) {
            Some(j) => !kinds[j].in_domain(),
            None => true,
        };
        if !starts {
            continue;
        }
        let mut line = vec![i];
        let mut cur = i;
        while let Some(j) = grid.shift(cur, *e) {
            if !kinds[j].in_domain() {
                break;
            }
            line.push(j);
            cur = j;
        }
        if line.len() >= 3 {
            lines.push(line);
        }
    }
    lines
}

/// Lower hull of equally spaced samples, written back in place. Returns true when a
/// value dropped by more than `thr`.
fn lower_hull_1d(vals: &mut [f64], thr: f64, hull: &mut Vec<usize>) -> bool {
    hull.clear();
    for k in 0..vals.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b is dropped when it lies on or above the chord a-k
            let cross = (b - a) as f64 * (vals[k] - vals[a]) - (vals[b] - vals[a]) * (k - a) as f64;
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut changed = false;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for k in a + 1..b {
            let t = (k - a) as f64 / (b - a) as f64;
            let chord = vals[a] + t * (vals[b] - vals[a]);
            if vals[k] - chord > thr {
                vals[k] = chord;
                changed = true;
            }
        }
    }
    changed
}

/// Largest function that is convex along every axis and diagonal grid line and lies
/// below `raw_values` on the in-domain nodes.
pub fn lower_convex_envelope(raw_values: &[f64], grid: &GridSpec) -> Result<ConvexGridFunction> {
    grid.validate()?;
    if raw_values.len() != grid.len() {
        return Err(MalabError::SizeMismatch {
            expected: grid.len(),
            found: raw_values.len(),
        });
    }
    let kinds = grid.node_kinds();
    let mut vals = raw_values.to_vec();
    for (i, k) in kinds.iter().enumerate() {
        if k.in_domain() && !vals[i].is_finite() {
            return Err(MalabError::NonFinite { node: i });
        }
    }
    let scale = vals
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| k.in_domain())
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let thr = 4.0 * f64::EPSILON * scale;
    let lines: Vec<Vec<usize>> = convexity_directions(grid.dim)
        .iter()
        .flat_map(|e| grid_lines(grid, &kinds, e))
        .collect();
    let mut buf = Vec::new();
    let mut hull = Vec::new();
    let mut sweeps = 0usize;
    const MAX_SWEEPS: usize = 100_000;
    loop {
        let mut changed = false;
        for line in &lines {
            buf.clear();
            buf.extend(line.iter().map(|&i| vals[i]));
            if lower_hull_1d(&mut buf, thr, &mut hull) {
                changed = true;
                for (&i, &v) in line.iter().zip(&buf) {
                    vals[i] = v;
                }
            }
        }
        sweeps += 1;
        if !changed {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            warn!("convex envelope stopped after {sweeps} sweeps without reaching a fixed point");
            break;
        }
    }
    debug!("convex envelope converged in {sweeps} sweeps");
    let mut out = ConvexGridFunction::new(grid.clone(), vals)?;
    let tol = out.default_tol_convex();
    out.certify(tol);
    Ok(out)
}
