//! Exact piecewise-linear oracle in two dimensions: plane enumeration for the convex
//! hull of nodal data, polygon clipping for subdifferential areas.
#![allow(dead_code)]

use malab::grid::{GridSpec, NodeKind};
use rand::Rng;

pub type Pt = [f64; 2];

/// Signed area of a simple polygon.
pub fn polygon_area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a[0] * b[1] - a[1] * b[0]
    })
    .sum::<f64>()
}

/// Clips a convex polygon by `a.p <= b` (Sutherland-Hodgman, one edge).
pub fn clip(poly: &[Pt], a: Pt, b: f64) -> Vec<Pt> {
    let side = |p: &Pt| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Polygon `{p : a_k.p <= b_k}` inside the square `[-cap, cap]^2`.
pub fn halfplane_polygon(cons: &[(Pt, f64)], cap: f64) -> Vec<Pt> {
    let mut poly = vec![[-cap, -cap], [cap, -cap], [cap, cap], [-cap, cap]];
    for &(a, b) in cons {
        poly = clip(&poly, a, b);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Values at every node of the largest convex function below the data: the maximum
/// over all supporting planes through three affinely independent nodes.
pub fn convex_hull_values(grid: &GridSpec, raw: &[f64]) -> Vec<f64> {
    let pts: Vec<(Pt, f64)> = (0..grid.len()).map(|i| {
        let x = grid.point(i);
        ([x[0], x[1]], raw[i])
    })
    .collect();
    let scale = raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let n = pts.len();
    let mut env = vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (p, q, r) = (pts[i], pts[j], pts[k]);
                let (d1, d2) = ([q.0[0] - p.0[0], q.0[1] - p.0[1]], [r.0[0] - p.0[0], r.0[1] - p.0[1]]);
                let det = d1[0] * d2[1] - d1[1] * d2[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let (e1, e2) = (q.1 - p.1, r.1 - p.1);
                let g = [(e1 * d2[1] - e2 * d1[1]) / det, (d1[0] * e2 - d2[0] * e1) / det];
                let plane = |x: Pt| p.1 + g[0] * (x[0] - p.0[0]) + g[1] * (x[1] - p.0[1]);
                if pts.iter().all(|s| s.1 >= plane(s.0) - tol) {
                    for (m, s) in pts.iter().enumerate() {
                        env[m] = env[m].max(plane(s.0).min(s.1));
                    }
                }
            }
        }
    }
    env
}

/// Subdifferential polygon of the convex hull of `(x_j, v_j)` at node `i`.
pub fn subdifferential(grid: &GridSpec, v: &[f64], i: usize) -> Vec<Pt> {
    let xi = grid.point(i);
    let cons: Vec<(Pt, f64)> = (0..grid.len())
        .filter(|&j| j != i)
        .map(|j| {
            let xj = grid.point(j);
            ([xj[0] - xi[0], xj[1] - xi[1]], v[j] - v[i])
        })
        .collect();
    let cap = 1e3 * (1.0 + v.iter().fold(0.0f64, |m, t| m.max(t.abs()))) / grid.min_spacing();
    halfplane_polygon(&cons, cap)
}

/// Exact Monge-Ampere mass of the interior nodes.
pub fn interior_mass(grid: &GridSpec, v: &[f64]) -> f64 {
    let kinds = grid.node_kinds();
    (0..grid.len()).filter(|&i| kinds[i] == NodeKind::Interior).map(|i| polygon_area(&subdifferential(grid, v, i))).sum()
}

/// `|{p : p.(c - x0) <= 1 for every corner c}|`: gradient image of the unit-depth cone
/// over the rectangle `lo..hi` with apex `x0`.
pub fn cone_polar_area(lo: Pt, hi: Pt, x0: Pt) -> f64 {
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let cons: Vec<(Pt, f64)> = corners.iter().map(|c| ([c[0] - x0[0], c[1] - x0[1]], 1.0)).collect();
    let width = (hi[0] - lo[0]).min(hi[1] - lo[1]);
    let gap = (x0[0] - lo[0]).min(hi[0] - x0[0]).min(x0[1] - lo[1]).min(hi[1] - x0[1]);
    polygon_area(&halfplane_polygon(&cons, 1e3 / gap.max(1e-9 * width)))
}

/// Random convex PL function on the grid, zero on the boundary nodes: the convex hull
/// of nonpositive interior data. At least one interior value is below `-0.05`.
pub fn random_convex_pl(grid: &GridSpec, rng: &mut impl Rng) -> Vec<f64> {
    let kinds = grid.node_kinds();
    let deep = rng.random_range(0.05..1.0);
    let raw: Vec<f64> = (0..grid.len())
        .map(|i| match kinds[i] {
            NodeKind::Interior if rng.random_bool(0.4) => -rng.random_range(0.0..deep),
            NodeKind::Interior => 0.0,
            _ => 0.0,
        })
        .collect();
    let mut raw = raw;
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| kinds[i] == NodeKind::Interior).collect();
    raw[interior[rng.random_range(0..interior.len())]] = -deep;
    convex_hull_values(grid, &raw)
}
