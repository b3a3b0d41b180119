//! Dirichlet problem `det D^2 u = f`, `u = phi` on the boundary, by Newton (policy) iteration on a
//! monotone wide-stencil scheme.

mod linear;
mod operator;

pub use linear::{bicgstab, Csr, Ilu0, KrylovStats};
pub use operator::{discrete_ma_operator, ma_residual, StencilPlan};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{is_discretely_convex, lower_convex_envelope, ConvexGridFunction};
use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};
use operator::{jacobian_row, operator_field, rounding_floor};

pub const DEFAULT_STENCIL_RADIUS: i64 = 2;
pub const DEFAULT_MAX_ITER: usize = 200;
const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_MAX_ITER: usize = 4000;

/// Residual tolerance by dimension: 1e-8 up to 2-d, 1e-6 in 3-d.
pub fn default_tol_residual(dim: usize) -> f64 {
    if dim >= 3 {
        1e-6
    } else {
        1e-8
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletProblem {
    pub grid: GridSpec,
    /// Right-hand side, positive at interior nodes.
    pub rhs: Vec<f64>,
    /// Boundary data, finite at boundary nodes (other entries ignored).
    pub boundary: Vec<f64>,
    pub stencil_radius: i64,
    /// Smallest interior value of the right-hand side.
    pub lambda: f64,
}

impl DirichletProblem {
    pub fn new(grid: GridSpec, rhs: Vec<f64>, boundary: Vec<f64>, stencil_radius: i64) -> Result<Self> {
        grid.validate()?;
        for v in [&rhs, &boundary] {
            if v.len() != grid.len() {
                return Err(MalabError::SizeMismatch {
                    expected: grid.len(),
                    found: v.len(),
                });
            }
        }
        let kinds = grid.node_kinds();
        let mut lambda = f64::INFINITY;
        for (i, k) in kinds.iter().enumerate() {
            match k {
                NodeKind::Interior => {
                    if !(rhs[i] > 0.0) || !rhs[i].is_finite() {
                        return Err(MalabError::OutOfRange(format!("right-hand side {} at node {i} is not positive", rhs[i])));
                    }
                    lambda = lambda.min(rhs[i]);
                }
                NodeKind::Boundary if !boundary[i].is_finite() => return Err(MalabError::NonFinite { node: i }),
                _ => {}
            }
        }
        if !lambda.is_finite() {
            return Err(MalabError::InvalidGrid("grid has no interior nodes".into()));
        }
        StencilPlan::new(&grid, stencil_radius)?;
        Ok(DirichletProblem {
            grid,
            rhs,
            boundary,
            stencil_radius,
            lambda,
        })
    }

    /// Problem with `f` and `phi` sampled at node coordinates.
    pub fn from_fns(grid: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync, phi: impl Fn(&[f64]) -> f64 + Sync, stencil_radius: i64) -> Result<Self> {
        let kinds = grid.node_kinds();
        let rhs: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| if kinds[i] == NodeKind::Interior { f(&grid.point(i)[..grid.dim]) } else { 0.0 })
            .collect();
        let boundary: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| if kinds[i] == NodeKind::Boundary { phi(&grid.point(i)[..grid.dim]) } else { f64::NAN })
            .collect();
        Self::new(grid, rhs, boundary, stencil_radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Residual beyond the rounding floor after each step (first entry: initial guess).
    pub residual_history: Vec<f64>,
    /// Max-norm of each Newton update.
    pub step_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub converged: bool,
    /// Max-norm residual of the returned function.
    pub final_residual: f64,
    /// Largest per-node effect of rounding the nodal values on the residual; convergence
    /// asks for `tol_residual` beyond it at every node.
    pub rounding_floor: f64,
    pub tol_residual: f64,
    /// The Newton iterate failed the convexity check and was replaced by its envelope.
    pub convexified: bool,
    /// Most negative second difference of the Newton iterate and the largest change the
    /// envelope made; zero when no convexification was needed.
    pub convexity_defect: f64,
    pub convexify_change: f64,
}

struct Numbering {
    unknown_of: Vec<usize>,
    nodes: Vec<usize>,
}

fn numbering(kinds: &[NodeKind]) -> Numbering {
    let mut unknown_of = vec![usize::MAX; kinds.len()];
    let mut nodes = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        if *k == NodeKind::Interior {
            unknown_of[i] = nodes.len();
            nodes.push(i);
        }
    }
    Numbering { unknown_of, nodes }
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// Solution of `Delta u = n f^{1/n}` with the problem's boundary data.
fn poisson_guess(p: &DirichletProblem, kinds: &[NodeKind], num: &Numbering) -> Result<Vec<f64>> {
    let grid = &p.grid;
    let n = grid.dim as f64;
    let rows: Vec<(Vec<(usize, f64)>, f64)> = num
        .nodes
        .par_iter()
        .map(|&i| {
            let mut row = Vec::with_capacity(2 * grid.dim + 1);
            let mut rhs = -n * p.rhs[i].powf(1.0 / n);
            let mut diag = 0.0;
            for a in 0..grid.dim {
                let c = 1.0 / (grid.spacing[a] * grid.spacing[a]);
                diag += 2.0 * c;
                for s in [-1i64, 1] {
                    let mut d = [0i64; 3];
                    d[a] = s;
                    let j = grid.shift(i, d).expect("interior nodes have axis neighbours");
                    if kinds[j] == NodeKind::Interior {
                        row.push((num.unknown_of[j], -c));
                    } else {
                        rhs += c * p.boundary[j];
                    }
                }
            }
            row.push((num.unknown_of[i], diag));
            (row, rhs)
        })
        .collect();
    let (rows, b): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let a = Csr::from_rows(rows);
    let mut x = vec![0.0; num.nodes.len()];
    let st = bicgstab(&a, &b, &mut x, 1e-12, KRYLOV_MAX_ITER)?;
    debug!("poisson guess: {} iterations, relative residual {:.3e}", st.iterations, st.relative_residual);
    let mut vals: Vec<f64> = (0..grid.len()).map(|i| if kinds[i] == NodeKind::Boundary { p.boundary[i] } else { f64::NAN }).collect();
    for (k, &i) in num.nodes.iter().enumerate() {
        vals[i] = x[k];
    }
    Ok(vals)
}

/// Max-norm residuals of the product form: raw, beyond the rounding floor, and the largest floor.
fn product_residual(p: &DirichletProblem, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], num: &Numbering) -> (f64, f64, f64) {
    let op = operator_field(&p.grid, kinds, plan, vals, false);
    let floors: Vec<f64> = num.nodes.par_iter().map(|&i| rounding_floor(&p.grid, kinds, plan, vals, i)).collect();
    let raw = max_abs(num.nodes.iter().map(|&i| op[i] - p.rhs[i]));
    let beyond = num.nodes.iter().zip(&floors).map(|(&i, fl)| ((op[i] - p.rhs[i]).abs() - fl).max(0.0)).fold(0.0, f64::max);
    (raw, beyond, floors.iter().copied().fold(0.0, f64::max))
}

/// (max |G - f^(1/n)| with the concave form, residual of the product form beyond rounding).
fn merit(p: &DirichletProblem, kinds: &[NodeKind], plan: &StencilPlan, vals: &[f64], num: &Numbering, root_rhs: &[f64]) -> (f64, f64) {
    let g = operator_field(&p.grid, kinds, plan, vals, true);
    (max_abs(num.nodes.iter().enumerate().map(|(k, &i)| g[i] - root_rhs[k])), product_residual(p, kinds, plan, vals, num).1)
}

/// Newton solve on the concave form `G(u) = f^(1/n)`, stopping once the product form meets
/// `tol_residual` beyond its rounding floor. `G` is a minimum of linear operators whose
/// negatives are M-matrices, so full steps are policy iteration: after the first step the
/// iterates decrease monotonically and no damping is needed. Non-convergence returns the last iterate with `converged = false`.
pub fn solve_dirichlet(p: &DirichletProblem, tol_residual: f64, max_iter: usize) -> Result<(ConvexGridFunction, SolverReport)> {
    let grid = &p.grid;
    let kinds = grid.node_kinds();
    let plan = StencilPlan::new(grid, p.stencil_radius)?;
    let num = numbering(&kinds);
    let inv_dim = 1.0 / grid.dim as f64;
    let root_rhs: Vec<f64> = num.nodes.iter().map(|&i| p.rhs[i].powf(inv_dim)).collect();
    let mut vals = poisson_guess(p, &kinds, &num)?;
    let (_, mut spec_res) = merit(p, &kinds, &plan, &vals, &num, &root_rhs);
    let mut report = SolverReport {
        iterations: 0,
        residual_history: vec![spec_res],
        step_history: Vec::new(),
        linear_iterations: Vec::new(),
        converged: false,
        final_residual: f64::NAN,
        rounding_floor: f64::NAN,
        tol_residual,
        convexified: false,
        convexity_defect: 0.0,
        convexify_change: 0.0,
    };
    info!("newton start: {} unknowns, residual {spec_res:.3e}", num.nodes.len());
    // solve (-J) delta = G - f^(1/n); boundary neighbours are fixed
    let newton_step = |vals: &[f64]| -> Result<(Vec<f64>, usize)> {
        let rows: Vec<(f64, Vec<(usize, f64)>)> = num.nodes.par_iter().map(|&i| jacobian_row(grid, &kinds, &plan, vals, i)).collect();
        let mut b = Vec::with_capacity(rows.len());
        let mut mat = Vec::with_capacity(rows.len());
        // rows scaled by their diagonal: weights near M would otherwise dominate the
        // relative Krylov tolerance and leave the other rows unresolved
        for (k, (g, row)) in rows.into_iter().enumerate() {
            let diag = row.iter().find(|(j, _)| *j == num.nodes[k]).map_or(1.0, |(_, c)| -c);
            let scale = if diag > 0.0 { 1.0 / diag } else { 1.0 };
            b.push(scale * (g - root_rhs[k]));
            mat.push(row.into_iter().filter(|(j, _)| kinds[*j] == NodeKind::Interior).map(|(j, c)| (num.unknown_of[j], -scale * c)).collect());
        }
        let a = Csr::from_rows(mat);
        let mut delta = vec![0.0; b.len()];
        let st = bicgstab(&a, &b, &mut delta, KRYLOV_TOL, KRYLOV_MAX_ITER)?;
        if !st.converged {
            debug!("krylov stopped at relative residual {:.3e}", st.relative_residual);
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(MalabError::LinearSolver(format!("breakdown (relative residual {:.3e})", st.relative_residual)));
        }
        Ok((delta, st.iterations))
    };
    let apply = |vals: &mut [f64], delta: &[f64]| {
        for (k, &i) in num.nodes.iter().enumerate() {
            vals[i] += delta[k];
        }
    };
    while spec_res > tol_residual && report.iterations < max_iter {
        let (delta, lin) = newton_step(&vals)?;
        apply(&mut vals, &delta);
        let res;
        (res, spec_res) = merit(p, &kinds, &plan, &vals, &num, &root_rhs);
        let step = max_abs(delta.iter().copied());
        report.iterations += 1;
        report.linear_iterations.push(lin);
        report.residual_history.push(spec_res);
        report.step_history.push(step);
        debug!("newton {}: residual {spec_res:.3e} (root form {res:.3e}), step {step:.3e}", report.iterations);
        if step <= 1e-15 * (1.0 + max_abs(num.nodes.iter().map(|&i| vals[i]))) {
            warn!("newton stalled at residual {spec_res:.3e} after {} iterations", report.iterations);
            break;
        }
    }
    // once the active frames are right one more step lands on the discrete solution up to
    // round-off; it is kept only if the residual does not grow
    if spec_res <= tol_residual && spec_res > 0.0 && report.iterations < max_iter {
        let (delta, lin) = newton_step(&vals)?;
        let mut trial = vals.clone();
        apply(&mut trial, &delta);
        let (_, trial_res) = merit(p, &kinds, &plan, &trial, &num, &root_rhs);
        if trial_res <= spec_res {
            vals = trial;
            spec_res = trial_res;
            report.iterations += 1;
            report.linear_iterations.push(lin);
            report.residual_history.push(spec_res);
            report.step_history.push(max_abs(delta.iter().copied()));
        }
    }
    let mut u = ConvexGridFunction::new(grid.clone(), vals)?;
    let tol_convex = u.default_tol_convex();
    if !u.certify(tol_convex) {
        let check = is_discretely_convex(&u, tol_convex);
        warn!("solution not discretely convex ({:?}); replacing by its lower convex envelope", check.violation);
        let meta = u.meta.clone();
        let env = lower_convex_envelope(u.values(), grid)?;
        report.convexity_defect = check.violation.map_or(0.0, |v| v.second_difference);
        report.convexify_change = max_abs(env.values().iter().zip(u.values()).filter(|(a, _)| a.is_finite()).map(|(a, b)| a - b));
        u = env;
        u.meta = meta;
        report.convexified = true;
    }
    let (raw, beyond, floor) = product_residual(p, &kinds, &plan, u.values(), &num);
    report.final_residual = raw;
    report.rounding_floor = floor;
    report.converged = beyond <= tol_residual;
    u.meta.lambda = Some(p.lambda);
    u.meta.big_lambda = Some(num.nodes.iter().map(|&i| p.rhs[i]).fold(0.0, f64::max));
    u.meta.sup_bound = Some(u.sup_norm());
    info!("newton done: {} iterations, residual {:.3e}, converged {}", report.iterations, report.final_residual, report.converged);
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|t| t * t).sum::<f64>()
    }

    #[test]
    fn one_dimensional_parabola() {
        let g = GridSpec::cube(1, 41, -1.0, 1.0).unwrap();
        let p = DirichletProblem::from_fns(g.clone(), |_| 1.0, |_| 0.0, 2).unwrap();
        let (u, rep) = solve_dirichlet(&p, 1e-10, 50).unwrap();
        assert!(rep.converged);
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((u.value(i) - 0.5 * (x * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_data_reproduced() {
        let g = GridSpec::cube(2, 33, -1.0, 1.0).unwrap();
        let p = DirichletProblem::from_fns(g.clone(), |_| 1.0, half_square, 2).unwrap();
        let (u, rep) = solve_dirichlet(&p, 1e-8, 50).unwrap();
        assert!(rep.converged, "{rep:?}");
        for i in 0..g.len() {
            assert!((u.value(i) - half_square(&g.point(i)[..2])).abs() < 1e-10);
        }
    }

    #[test]
    fn anisotropic_rhs_converges_with_decreasing_residuals() {
        let g = GridSpec::cube(2, 25, -1.0, 1.0).unwrap();
        let p = DirichletProblem::from_fns(g, |x| 1.0 + x[0] * x[0], |x| x[0].abs() + 0.5 * x[1] * x[1], 2).unwrap();
        let (u, rep) = solve_dirichlet(&p, 1e-8, 200).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]));
        assert!(u.is_certified());
    }

    #[test]
    fn three_dimensional_quadratic() {
        let g = GridSpec::cube(3, 13, -1.0, 1.0).unwrap();
        let p = DirichletProblem::from_fns(g.clone(), |_| 1.0, |x| 0.5 * x[0] * x[0] + x[1] * x[1] + 0.25 * x[2] * x[2], 2).unwrap();
        let (u, rep) = solve_dirichlet(&p, 1e-6, 50).unwrap();
        assert!(rep.converged, "{rep:?}");
        for i in 0..g.len() {
            let x = g.point(i);
            assert!((u.value(i) - (0.5 * x[0] * x[0] + x[1] * x[1] + 0.25 * x[2] * x[2])).abs() < 1e-8);
        }
    }

    #[test]
    fn vanishing_rhs_gives_envelope_of_boundary_data() {
        let g = GridSpec::cube(2, 17, -1.0, 1.0).unwrap();
        // data of a convex function that is flat along (1, -1): the envelope of the
        // boundary values is that function itself
        let phi = |x: &[f64]| (x[0] + x[1]).exp() + 0.5 * x[1] - x[0];
        let p = DirichletProblem::from_fns(g.clone(), |_| 1e-12, phi, 2).unwrap();
        let (u, _) = solve_dirichlet(&p, 1e-8, 200).unwrap();
        let kinds = g.node_kinds();
        let raw: Vec<f64> = (0..g.len()).map(|i| if kinds[i] == NodeKind::Boundary { phi(&g.point(i)[..2]) } else { 1e3 }).collect();
        let env = lower_convex_envelope(&raw, &g).unwrap();
        for i in 0..g.len() {
            assert!((u.value(i) - env.value(i)).abs() < 1e-4, "node {i}: {} vs {}", u.value(i), env.value(i));
        }
    }

    #[test]
    fn report_serializes() {
        let g = GridSpec::cube(2, 9, -1.0, 1.0).unwrap();
        let p = DirichletProblem::from_fns(g, |_| 1.0, half_square, 2).unwrap();
        let (_, rep) = solve_dirichlet(&p, 1e-8, 10).unwrap();
        let s = serde_json::to_string(&rep).unwrap();
        let back: SolverReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rep);
    }
}
