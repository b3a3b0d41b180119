use super::ConvexGridFunction;
use crate::error::{MalabError, Result};

/// Vertices of the local subdifferential approximation at a node, together with the
/// one-sided axis difference quotients that bound it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSet {
    pub node: usize,
    pub vertices: Vec<Vec<f64>>,
    pub backward: Vec<f64>,
    pub forward: Vec<f64>,
    /// Some axis lacks an in-domain neighbour on one side; the set was truncated.
    pub partial: bool,
}

struct HalfSpace {
    a: [f64; 3],
    b: f64,
}

fn local_constraints(u: &ConvexGridFunction, node: usize) -> Vec<HalfSpace> {
    let grid = u.grid();
    let dim = grid.dim;
    let mut out = Vec::new();
    let r = |a: usize| if a < dim { -1i64..=1 } else { 0..=0 };
    for i in r(0) {
        for j in r(1) {
            for k in r(2) {
                let d = [i, j, k];
                if d == [0, 0, 0] {
                    continue;
                }
                if let Some(y) = grid.shift(node, d) {
                    if u.in_domain(y) {
                        let mut a = [0.0; 3];
                        for ax in 0..dim {
                            a[ax] = d[ax] as f64 * grid.spacing[ax];
                        }
                        out.push(HalfSpace {
                            a,
                            b: u.value(y) - u.value(node),
                        });
                    }
                }
            }
        }
    }
    out
}

fn axis_quotients(u: &ConvexGridFunction, node: usize) -> (Vec<f64>, Vec<f64>) {
    let grid = u.grid();
    let mut bwd = vec![f64::NAN; grid.dim];
    let mut fwd = vec![f64::NAN; grid.dim];
    for a in 0..grid.dim {
        let mut d = [0i64; 3];
        d[a] = 1;
        if let Some(y) = grid.shift(node, d) {
            if u.in_domain(y) {
                fwd[a] = (u.value(y) - u.value(node)) / grid.spacing[a];
            }
        }
        d[a] = -1;
        if let Some(y) = grid.shift(node, d) {
            if u.in_domain(y) {
                bwd[a] = (u.value(node) - u.value(y)) / grid.spacing[a];
            }
        }
    }
    (bwd, fwd)
}

fn solve_small(m: &[[f64; 3]], rhs: &[f64], n: usize) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for r in 0..n {
        for c in 0..n {
            a[r][c] = m[r][c];
        }
        a[r][n] = rhs[r];
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = [0.0; 3];
    for r in 0..n {
        x[r] = a[r][n] / a[r][r];
    }
    // reject near-singular systems
    let scale: f64 = (0..n).map(|r| (0..n).map(|c| m[r][c].abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    let det_ok = (0..n).all(|r| a[r][r].abs() > 1e-12 * scale);
    if det_ok {
        Some(x)
    } else {
        None
    }
}

/// Largest violation of the local support inequalities by slope `p`.
pub fn support_defect(u: &ConvexGridFunction, node: usize, p: &[f64]) -> f64 {
    let dim = u.dim();
    local_constraints(u, node)
        .iter()
        .map(|h| (0..dim).map(|a| h.a[a] * p[a]).sum::<f64>() - h.b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Default support tolerance: spacing times the Lipschitz estimate of `u`.
pub fn default_tol_support(u: &ConvexGridFunction) -> f64 {
    let grid = u.grid();
    let mut lip: f64 = 0.0;
    for i in 0..grid.len() {
        if !u.in_domain(i) {
            continue;
        }
        for a in 0..grid.dim {
            let mut d = [0i64; 3];
            d[a] = 1;
            if let Some(j) = grid.shift(i, d) {
                if u.in_domain(j) {
                    lip = lip.max((u.value(j) - u.value(i)).abs() / grid.spacing[a]);
                }
            }
        }
    }
    grid.max_spacing() * lip.max(1e-12)
}

/// Vertices of `{p : u(y) >= u(x) + p.(y - x)}` over the in-domain neighbours `y` of `x`.
pub fn subgradient_extremes(u: &ConvexGridFunction, node: usize) -> Result<SubgradientSet> {
    if node >= u.grid().len() || !u.in_domain(node) {
        return Err(MalabError::NotInDomain { node });
    }
    let dim = u.dim();
    let (bwd, fwd) = axis_quotients(u, node);
    let partial = bwd.iter().chain(&fwd).any(|q| q.is_nan());
    let mut cons = local_constraints(u, node);
    let known = bwd.iter().chain(&fwd).filter(|q| q.is_finite()).fold(0.0f64, |m, q| m.max(q.abs()));
    let cap = 4.0 * known + 1.0;
    for a in 0..dim {
        let mut e = [0.0; 3];
        if fwd[a].is_nan() {
            e[a] = 1.0;
            cons.push(HalfSpace { a: e, b: cap });
        }
        if bwd[a].is_nan() {
            e[a] = -1.0;
            cons.push(HalfSpace { a: e, b: cap });
        }
    }
    let scale = cons.iter().fold(0.0f64, |m, h| m.max(h.b.abs())).max(1e-300);
    let tol = 1e-10 * scale;
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let push = |p: [f64; 3], vertices: &mut Vec<Vec<f64>>| {
        let feasible = cons.iter().all(|h| (0..dim).map(|a| h.a[a] * p[a]).sum::<f64>() <= h.b + tol);
        if !feasible {
            return;
        }
        let pv = p[..dim].to_vec();
        let pscale = pv.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        if !vertices.iter().any(|q| q.iter().zip(&pv).all(|(a, b)| (a - b).abs() <= 1e-9 * pscale)) {
            vertices.push(pv);
        }
    };
    let m = cons.len();
    match dim {
        1 => {
            let lo = if bwd[0].is_nan() { -cap } else { bwd[0] };
            let hi = if fwd[0].is_nan() { cap } else { fwd[0] };
            if lo <= hi + tol {
                push([lo, 0.0, 0.0], &mut vertices);
                push([hi, 0.0, 0.0], &mut vertices);
            }
        }
        2 => {
            for i in 0..m {
                for j in i + 1..m {
                    let mat = [cons[i].a, cons[j].a, [0.0; 3]];
                    if let Some(p) = solve_small(&mat, &[cons[i].b, cons[j].b], 2) {
                        push(p, &mut vertices);
                    }
                }
            }
        }
        _ => {
            for i in 0..m {
                for j in i + 1..m {
                    for k in j + 1..m {
                        let mat = [cons[i].a, cons[j].a, cons[k].a];
                        if let Some(p) = solve_small(&mat, &[cons[i].b, cons[j].b, cons[k].b], 3) {
                            push(p, &mut vertices);
                        }
                    }
                }
            }
        }
    }
    vertices.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SubgradientSet {
        node,
        vertices,
        backward: bwd,
        forward: fwd,
        partial,
    })
}

/// Deterministic supporting slope: the point of the axis-quotient box nearest the
/// origin when it satisfies the local support inequalities, otherwise the vertex of
/// smallest norm.
pub fn default_subgradient(u: &ConvexGridFunction, node: usize) -> Result<Vec<f64>> {
    if node >= u.grid().len() || !u.in_domain(node) {
        return Err(MalabError::NotInDomain { node });
    }
    let dim = u.dim();
    let (bwd, fwd) = axis_quotients(u, node);
    let mut p = vec![0.0; dim];
    for a in 0..dim {
        let (lo, hi) = (bwd[a], fwd[a]);
        p[a] = match (lo.is_nan(), hi.is_nan()) {
            (false, false) if lo <= hi => 0.0f64.clamp(lo, hi),
            (false, false) => 0.5 * (lo + hi),
            (true, false) => hi.min(0.0),
            (false, true) => lo.max(0.0),
            (true, true) => 0.0,
        };
    }
    let scale = local_constraints(u, node).iter().fold(0.0f64, |m, h| m.max(h.b.abs())).max(1e-300);
    if support_defect(u, node, &p) <= 1e-10 * scale {
        return Ok(p);
    }
    let set = subgradient_extremes(u, node)?;
    let best = set
        .vertices
        .into_iter()
        .min_by(|a, b| {
            let na: f64 = a.iter().map(|c| c * c).sum();
            let nb: f64 = b.iter().map(|c| c * c).sum();
            na.total_cmp(&nb)
        })
        .unwrap_or(p);
    Ok(best)
}
