//! The assembled Dirichlet problem `det D^2 u = 1` on `[-1,1]^3` with boundary data
//! `C (v(x1) + |x2|)`, compared against the tilted subsolutions `l_s + w_s` through
//! every grid abscissa `s` of the Cantor set.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cantor::{build_cantor, CantorStructure};
use super::spike::SpikeFunction;
use super::subsolution::{calibrated_subsolution, halton, SubsolutionReport, SubsolutionW};
use crate::convex::ConvexGridFunction;
use crate::error::{MalabError, Result};
use crate::grid::{GridSpec, NodeKind};
use crate::sections::{default_h_res, maximal_height};
use crate::solver::{default_tol_residual, solve_dirichlet, DirichletProblem, SolverReport, DEFAULT_MAX_ITER, DEFAULT_STENCIL_RADIUS};

/// Boundary constant: searched automatically or fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryConstant {
    Auto,
    Fixed(f64),
}

impl Serialize for BoundaryConstant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BoundaryConstant::Auto => s.serialize_str("auto"),
            BoundaryConstant::Fixed(c) => s.serialize_f64(*c),
        }
    }
}

impl<'de> Deserialize<'de> for BoundaryConstant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) if c > 0.0 && c.is_finite() => Ok(BoundaryConstant::Fixed(c)),
            Raw::Num(c) => Err(serde::de::Error::custom(format!("boundary constant {c} must be positive"))),
            Raw::Str(s) if s == "auto" => Ok(BoundaryConstant::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("boundary constant \"{s}\" is neither a number nor \"auto\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExampleConfig {
    /// Grid points per axis on `[-1, 1]^3`.
    pub n: usize,
    /// Depth of the Cantor approximation used to pick survivor abscissas.
    pub cantor_depth: usize,
    /// Truncation depth of the spike series.
    pub spike_depth: usize,
    pub c_bd: BoundaryConstant,
    pub tol_residual: f64,
    pub max_iter: usize,
    pub stencil_radius: i64,
    /// Comparison and line tolerances, in multiples of the spacing.
    pub comparison_tol: f64,
    pub line_tol: f64,
    pub boundary_samples: usize,
}

impl Default for ExampleConfig {
    fn default() -> Self {
        ExampleConfig {
            n: 33,
            cantor_depth: 6,
            spike_depth: 12,
            c_bd: BoundaryConstant::Auto,
            tol_residual: default_tol_residual(3),
            max_iter: DEFAULT_MAX_ITER,
            stencil_radius: DEFAULT_STENCIL_RADIUS,
            comparison_tol: 5.0,
            line_tol: 5.0,
            boundary_samples: 10_000,
        }
    }
}

fn on_box_boundary(x: &[f64]) -> bool {
    x.iter().any(|t| (t.abs() - 1.0).abs() <= 1e-12)
}

/// `C (v(x1) + |x2|)` on the boundary of `[-1, 1]^3`.
pub fn boundary_phi(x: &[f64], c_bd: f64, v: &SpikeFunction) -> Result<f64> {
    if x.len() != 3 || !on_box_boundary(x) || x.iter().any(|t| t.abs() > 1.0 + 1e-12) {
        return Err(MalabError::OutOfRange(format!("{x:?} is not on the boundary of [-1, 1]^3")));
    }
    Ok(c_bd * (v.v_eval(x[0])? + x[1].abs()))
}

/// Grid abscissas in `[-1/2, 1/2]` lying in a surviving interval at the Cantor depth.
pub fn snapped_survivors(grid: &GridSpec, cantor: &CantorStructure) -> Vec<f64> {
    (0..grid.counts[0])
        .map(|i| grid.origin[0] + i as f64 * grid.spacing[0])
        .filter(|x| x.abs() <= 0.5 + 1e-12 && cantor.survives(*x, 1e-12))
        .collect()
}

/// Tangent of the boundary data at a survivor: `l_s(x) = C (v(s) + p_s (x1 - s))` with
/// `p_s` the midpoint of the subgradient interval of `v` at `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub s: f64,
    pub v_s: f64,
    pub slope: f64,
}

impl Tangent {
    pub fn at(v: &SpikeFunction, s: f64) -> Result<Self> {
        let [lo, hi] = v.v_subgradient(s)?;
        Ok(Tangent { s, v_s: v.v_eval(s)?, slope: 0.5 * (lo + hi) })
    }

    pub fn eval(&self, c_bd: f64, x1: f64) -> f64 {
        c_bd * (self.v_s + self.slope * (x1 - self.s))
    }

    /// `l_s + w_s`.
    pub fn barrier(&self, c_bd: f64, w: &SubsolutionW, x: &[f64]) -> Result<f64> {
        Ok(self.eval(c_bd, x[0]) + w.eval([x[0] - self.s, x[1], x[2]])?)
    }
}

/// Smallest `C = 2^m` with `C (v - tangent + |x2|) >= w_s` at every boundary node, then doubled.
pub fn search_boundary_constant(grid: &GridSpec, v: &SpikeFunction, w: &SubsolutionW, tangents: &[Tangent]) -> Result<f64> {
    let kinds = grid.node_kinds();
    let mut need: f64 = 0.0;
    for i in (0..grid.len()).filter(|&i| kinds[i] == NodeKind::Boundary) {
        let x = grid.point(i);
        for t in tangents {
            let gap = v.v_eval(x[0])? - t.v_s - t.slope * (x[0] - t.s) + x[1].abs();
            let ws = w.eval([x[0] - t.s, x[1], x[2]])?;
            if ws > 0.0 {
                if gap <= 0.0 {
                    return Err(MalabError::Degenerate(format!("boundary data touches the tangent at {x:?} where w_s = {ws:e} > 0")));
                }
                need = need.max(ws / gap);
            }
        }
    }
    let mut c = 1.0f64;
    while c < need {
        c *= 2.0;
        if c > 1e12 {
            return Err(MalabError::OutOfRange("boundary constant search diverged".into()));
        }
    }
    Ok(2.0 * c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub points: usize,
    /// Fraction of (point, survivor) pairs with `phi >= l_s + w_s`.
    pub fraction_ok: f64,
    pub min_margin: f64,
    pub min_margin_point: [f64; 3],
}

/// Dense comparison of `phi` against `l_s + w_s` on Halton points of the six faces.
pub fn boundary_sample(count: usize, c_bd: f64, v: &SpikeFunction, w: &SubsolutionW, tangents: &[Tangent]) -> Result<BoundarySample> {
    let mut ok = 0usize;
    let mut total = 0usize;
    let mut min_margin = f64::INFINITY;
    let mut min_point = [f64::NAN; 3];
    for i in 1..=count as u64 {
        let face = (halton(i, 7) * 6.0) as usize;
        let (a, b) = (2.0 * halton(i, 2) - 1.0, 2.0 * halton(i, 3) - 1.0);
        let side = if face % 2 == 0 { -1.0 } else { 1.0 };
        let x = match face / 2 {
            0 => [side, a, b],
            1 => [a, side, b],
            _ => [a, b, side],
        };
        let phi = boundary_phi(&x, c_bd, v)?;
        for t in tangents {
            let m = phi - t.barrier(c_bd, w, &x)?;
            total += 1;
            if m >= 0.0 {
                ok += 1;
            }
            if m < min_margin {
                min_margin = m;
                min_point = x;
            }
        }
    }
    Ok(BoundarySample {
        points: count,
        fraction_ok: ok as f64 / total.max(1) as f64,
        min_margin,
        min_margin_point: min_point,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tol: f64,
}

/// Per-survivor diagnostics along the line `{(s, 0, t)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub s: f64,
    pub nodes: usize,
    /// Largest distance of `u` from the chord between the two boundary end points.
    pub max_affine_deviation: f64,
    pub max_hbar: f64,
    pub flagged: usize,
    pub interior_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleChecks {
    pub n: usize,
    pub spacing: f64,
    pub survivors: Vec<f64>,
    pub c_bd: f64,
    pub subsolution: SubsolutionReport,
    pub boundary_sample: BoundarySample,
    pub solver: SolverReport,
    pub lines: Vec<LineReport>,
    /// Minimum over nodes and survivors of `u - l_s - w_s`.
    pub min_comparison_gap: f64,
    pub h_res: f64,
    /// Interior nodes off the survivor lines with `hbar < h_res`.
    pub flagged_off_lines: usize,
    pub checks: Vec<CheckResult>,
}

impl ExampleChecks {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

pub struct ExampleRun {
    pub u: ConvexGridFunction,
    pub cantor: CantorStructure,
    pub w: SubsolutionW,
    pub checks: ExampleChecks,
}

/// `hbar` at every interior node (default subgradient and threshold).
pub fn hbar_field(u: &ConvexGridFunction) -> Result<Vec<f64>> {
    let kinds = u.kinds();
    (0..u.grid().len())
        .into_par_iter()
        .map(|i| if kinds[i] == NodeKind::Interior { maximal_height(u, i).map(|m| m.hbar) } else { Ok(f64::NAN) })
        .collect()
}

/// Builds, solves and checks the example.
pub fn assemble_example(cfg: &ExampleConfig) -> Result<ExampleRun> {
    let grid = GridSpec::cube(3, cfg.n, -1.0, 1.0)?;
    let sp = grid.min_spacing();
    let cantor = build_cantor(cfg.cantor_depth)?;
    let v = SpikeFunction::new(cfg.spike_depth)?;
    let survivors = snapped_survivors(&grid, &cantor);
    if survivors.is_empty() {
        return Err(MalabError::InvalidGrid(format!("no grid abscissa of the {}-point grid lies in the depth-{} Cantor set", cfg.n, cfg.cantor_depth)));
    }
    let tangents: Vec<Tangent> = survivors.iter().map(|&s| Tangent::at(&v, s)).collect::<Result<_>>()?;
    let (w, sub) = calibrated_subsolution()?;
    let c_bd = match cfg.c_bd {
        BoundaryConstant::Fixed(c) => c,
        BoundaryConstant::Auto => search_boundary_constant(&grid, &v, &w, &tangents)?,
    };
    info!("example: n = {}, survivors {:?}, C_bd = {c_bd}, w scale {:.4e}", cfg.n, survivors, w.scale);
    let sample = boundary_sample(cfg.boundary_samples, c_bd, &v, &w, &tangents)?;

    // boundary values only depend on x1 and x2
    let v_cache: Vec<f64> = (0..cfg.n).map(|i| v.v_eval(grid.origin[0] + i as f64 * sp)).collect::<Result<_>>()?;
    let phi = |x: &[f64]| {
        let i = ((x[0] - grid.origin[0]) / sp).round() as usize;
        c_bd * (v_cache[i] + x[1].abs())
    };
    let problem = DirichletProblem::from_fns(grid.clone(), |_| 1.0, phi, cfg.stencil_radius)?;
    let (u, solver) = solve_dirichlet(&problem, cfg.tol_residual, cfg.max_iter)?;
    if !solver.converged {
        warn!("example solve did not converge (residual {:.3e}); checks are partial", solver.final_residual);
    }

    let kinds = grid.node_kinds();
    let gaps: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| kinds[i].in_domain())
        .map(|i| {
            let x = grid.point(i);
            tangents.iter().map(|t| Ok(u.value(i) - t.barrier(c_bd, &w, &x)?)).try_fold(f64::INFINITY, |m, g: Result<f64>| Ok::<f64, MalabError>(m.min(g?)))
        })
        .collect::<Result<_>>()?;
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);

    let h_res = default_h_res(&u);
    let hbar = hbar_field(&u)?;
    let mut on_line = vec![false; grid.len()];
    let mut lines = Vec::new();
    let mid = cfg.n / 2;
    for &s in &survivors {
        let i1 = grid.nearest(&[s, 0.0, 0.0]);
        let [a, _, _] = grid.multi(i1);
        let nodes: Vec<usize> = (0..cfg.n).map(|k| grid.index([a, mid, k])).collect();
        let (u0, u1) = (u.value(nodes[0]), u.value(nodes[cfg.n - 1]));
        let mut dev: f64 = 0.0;
        let mut max_hbar: f64 = 0.0;
        let mut flagged = 0;
        let mut interior = 0;
        for (k, &i) in nodes.iter().enumerate() {
            on_line[i] = true;
            let t = k as f64 / (cfg.n - 1) as f64;
            dev = dev.max((u.value(i) - ((1.0 - t) * u0 + t * u1)).abs());
            if kinds[i] == NodeKind::Interior {
                interior += 1;
                max_hbar = max_hbar.max(hbar[i]);
                if hbar[i] < h_res {
                    flagged += 1;
                }
            }
        }
        lines.push(LineReport {
            s,
            nodes: nodes.len(),
            max_affine_deviation: dev,
            max_hbar,
            flagged,
            interior_nodes: interior,
        });
    }
    let flagged_off_lines = (0..grid.len()).filter(|&i| kinds[i] == NodeKind::Interior && !on_line[i] && hbar[i] < h_res).count();

    let line_tol = cfg.line_tol * sp;
    let worst_dev = lines.iter().map(|l| l.max_affine_deviation).fold(0.0, f64::max);
    let worst_hbar = lines.iter().map(|l| l.max_hbar).fold(0.0, f64::max);
    let checks = vec![
        CheckResult {
            name: "solver_converged".into(),
            passed: solver.converged,
            value: solver.final_residual,
            tol: cfg.tol_residual,
        },
        CheckResult {
            name: "comparison".into(),
            passed: min_gap >= -cfg.comparison_tol * sp,
            value: min_gap,
            tol: -cfg.comparison_tol * sp,
        },
        CheckResult {
            name: "line_affine".into(),
            passed: worst_dev <= line_tol,
            value: worst_dev,
            tol: line_tol,
        },
        CheckResult {
            name: "singular_flags".into(),
            passed: lines.iter().all(|l| l.flagged == l.interior_nodes),
            value: worst_hbar,
            tol: h_res,
        },
    ];
    let checks = ExampleChecks {
        n: cfg.n,
        spacing: sp,
        survivors,
        c_bd,
        subsolution: sub,
        boundary_sample: sample,
        solver,
        lines,
        min_comparison_gap: min_gap,
        h_res,
        flagged_off_lines,
        checks,
    };
    Ok(ExampleRun { u, cantor, w, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub n: usize,
    pub solver: SolverReport,
    pub flagged: usize,
    pub min_hbar: f64,
    pub h_res: f64,
    pub max_error: f64,
}

/// Strictly convex control: `f = 1`, boundary data `|x|^2 / 2`.
pub fn control_run(n: usize, tol_residual: f64) -> Result<(ConvexGridFunction, ControlReport)> {
    let grid = GridSpec::cube(3, n, -1.0, 1.0)?;
    let q = |x: &[f64]| 0.5 * x.iter().map(|t| t * t).sum::<f64>();
    let problem = DirichletProblem::from_fns(grid.clone(), |_| 1.0, q, DEFAULT_STENCIL_RADIUS)?;
    let (u, solver) = solve_dirichlet(&problem, tol_residual, DEFAULT_MAX_ITER)?;
    let h_res = default_h_res(&u);
    let hbar = hbar_field(&u)?;
    let interior: Vec<f64> = hbar.iter().copied().filter(|h| h.is_finite()).collect();
    let max_error = (0..grid.len()).filter(|&i| u.kind(i).in_domain()).map(|i| (u.value(i) - q(&grid.point(i))).abs()).fold(0.0, f64::max);
    Ok((
        u,
        ControlReport {
            n,
            solver,
            flagged: interior.iter().filter(|&&h| h < h_res).count(),
            min_hbar: interior.iter().copied().fold(f64::INFINITY, f64::min),
            h_res,
            max_error,
        },
    ))
}
