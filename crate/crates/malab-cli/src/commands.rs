use std::collections::BTreeSet;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::output::OutputDir;
use crate::CliError;
use malab::config::{ExperimentConfig, Problem};
use malab::convex::{default_subgradient, discrete_laplacian, ConvexGridFunction};
use malab::estimates::{
    ball_orlicz_ratio, cell_weights, decay_report, natural_cover_sum, orlicz_integral, prop_probe, singular_ball_lower_bound, EstimateReport, FitModel, SeriesPoint, SingularLine,
    Verdict,
};
use malab::grid::NodeKind;
use malab::magf;
use malab::sections::{default_h_res, extract_section, SectionReport};
use malab::singular::{assemble_example, hbar_field, lengths_f64, ExampleChecks};
use malab::solver::{solve_dirichlet, DirichletProblem, SolverReport};

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    grid: String,
    problem: &'a Problem,
    solver: &'a SolverReport,
    /// Max nodal error against the closed-form solution, when there is one.
    max_error: Option<f64>,
}

pub fn solve(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg)?;
    let (u, report, max_error) = match &cfg.problem {
        Problem::SingularExample => {
            let run = assemble_example(&cfg.example)?;
            (run.u, run.checks.solver, None)
        }
        problem => {
            let grid = cfg.grid.build()?;
            let exact = |x: &[f64]| problem.exact(x).expect("closed-form problem");
            let p = DirichletProblem::from_fns(grid.clone(), |x| problem.rhs(x), exact, cfg.solver.stencil_radius)?;
            let tol = cfg.solver.tol_residual.expect("resolved config");
            let (u, report) = solve_dirichlet(&p, tol, cfg.solver.max_iter)?;
            let err = (0..grid.len()).filter(|&i| u.in_domain(i)).map(|i| (u.value(i) - exact(&grid.point_vec(i))).abs()).fold(0.0, f64::max);
            info!("max nodal error {err:.3e}");
            (u, report, Some(err))
        }
    };
    out.write("solution.magf", magf::write(&u).as_bytes())?;
    let grid = u.grid().label();
    out.write_json("report.json", &SolveReport { grid, problem: &cfg.problem, solver: &report, max_error })?;
    out.finish()?;
    if report.converged {
        Ok(())
    } else {
        Err(CliError::Solver(format!("residual {:.3e} after {} iterations", report.final_residual, report.iterations)))
    }
}

pub fn build_example(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg)?;
    let run = assemble_example(&cfg.example)?;
    out.write("cantor.json", (run.cantor.to_json()? + "\n").as_bytes())?;
    out.write_json::<ExampleChecks>("example-checks.json", &run.checks)?;
    out.write("solution.magf", magf::write(&run.u).as_bytes())?;
    out.finish()?;
    for c in &run.checks.checks {
        info!("check {}: {} (value {:.3e}, tol {:.3e})", c.name, if c.passed { "pass" } else { "FAIL" }, c.value, c.tol);
    }
    let failed = run.checks.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

#[derive(Debug, Serialize)]
struct SectionsFile {
    grid: String,
    h_res: f64,
    hbar_min: f64,
    hbar_max: f64,
    singular_nodes: usize,
    /// Distinct first coordinates of the flagged nodes.
    singular_abscissas: Vec<f64>,
    sections: Vec<SectionReport>,
}

fn load_solution(cfg: &ExperimentConfig) -> Result<ConvexGridFunction, CliError> {
    let path = cfg.solution.as_ref().ok_or_else(|| CliError::Config("analyze needs a solution file".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("solution {path}: {e}")))?;
    let mut u = magf::parse(&text).map_err(|e| CliError::Config(format!("solution {path}: {e}")))?;
    let tol = u.default_tol_convex();
    if !u.certify(tol) {
        return Err(CliError::Config(format!("solution {path} is not discretely convex")));
    }
    Ok(u)
}

fn name_of(prefix: &str, x: f64) -> String {
    format!("{prefix}{}", x.to_string().replace(['.', '-'], "p"))
}

pub fn analyze(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let u = load_solution(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    let grid = u.grid().clone();
    let label = grid.label();
    let date = chrono::Utc::now().format("%Y%m%d").to_string();
    let est = &cfg.estimates;

    let hbar = hbar_field(&u)?;
    let h_res = default_h_res(&u);
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| u.kind(i) == NodeKind::Interior).collect();
    let singular: Vec<usize> = interior.iter().copied().filter(|&i| hbar[i] < h_res).collect();
    let abscissas: BTreeSet<i64> = singular.iter().map(|&i| grid.multi(i)[0] as i64).collect();
    let mut nodes: Vec<(usize, f64)> = est.sections.iter().map(|s| (grid.nearest(&s.x), s.h)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..est.random_sections {
        nodes.push((interior[rng.random_range(0..interior.len())], est.random_section_h));
    }
    let sections = nodes
        .iter()
        .map(|&(node, h)| {
            let p = default_subgradient(&u, node)?;
            Ok(extract_section(&u, node, &p, h)?.report(hbar[node]))
        })
        .collect::<Result<Vec<_>, malab::MalabError>>()?;
    let finite = interior.iter().map(|&i| hbar[i]);
    out.write_json(
        "sections.json",
        &SectionsFile {
            grid: label.clone(),
            h_res,
            hbar_min: finite.clone().fold(f64::INFINITY, f64::min),
            hbar_max: finite.fold(0.0, f64::max),
            singular_nodes: singular.len(),
            singular_abscissas: abscissas.iter().map(|&a| grid.origin[0] + a as f64 * grid.spacing[0]).collect(),
            sections,
        },
    )?;
    info!("{} of {} interior nodes flagged singular", singular.len(), interior.len());

    let lap = discrete_laplacian(&u);
    let region = est.region.clone().expect("resolved config");
    let weights = cell_weights(&grid, &region);
    let mut reports = Vec::new();
    let regime = if singular.is_empty() { FitModel::Power } else { FitModel::LogPower };
    reports.push(decay_report("decay", &label, json!({ "region": region, "min_level_nodes": est.min_level_nodes }), &lap, &weights, est.min_level_nodes, regime)?);

    let mut ps = est.orlicz_exponents.clone();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let series = ps.iter().map(|&p| Ok(SeriesPoint::exact(p, orlicz_integral(&lap, &weights, p)?))).collect::<Result<Vec<_>, malab::MalabError>>()?;
    reports.push(EstimateReport::new("orlicz", &label, json!({ "region": region }), series)?);

    let (_, big_l) = lengths_f64(est.covering_depth);
    for &eta in &est.covering_etas {
        let series = (1..=est.covering_depth).map(|k| SeriesPoint::exact(k as f64, natural_cover_sum(big_l[k], k, eta))).collect();
        reports.push(EstimateReport::new(&name_of("covering_eta", eta), &label, json!({ "eta": eta, "a": 1.0 }), series)?);
    }

    let mut radii = est.ball_radii.clone();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    for (b, x) in est.ball_points.iter().enumerate() {
        let node = grid.nearest(x);
        let centre = grid.point(node);
        let line = est.line_direction.map(|direction| SingularLine { point: centre, direction });
        let is_singular = hbar[node] < h_res;
        let bounds = if is_singular {
            singular_ball_lower_bound(&u, &lap, node, &radii, est.ball_m, line.as_ref())?
        } else {
            ball_orlicz_ratio(&u, &lap, node, &radii, est.ball_m, line.as_ref())?
        };
        let series = bounds
            .iter()
            .map(|bb| SeriesPoint { param: bb.r, value: bb.ratio, lo: bb.ratio.min(bb.ratio_excluded), hi: bb.ratio.max(bb.ratio_excluded) })
            .collect();
        let mut r = EstimateReport::new(&format!("ball_{b}"), &label, json!({ "x": &centre[..grid.dim], "m": est.ball_m, "singular": is_singular, "bounds": bounds }), series)?;
        let violations = bounds.iter().filter(|bb| !bb.jensen.holds).count();
        if violations > 0 {
            warn!("ball {b}: {violations} Jensen violations");
        }
        r.verdict = if violations == 0 { Verdict::Consistent } else { Verdict::Inconsistent };
        reports.push(r);
    }

    for (k, x) in est.probe_points.iter().enumerate() {
        let node = grid.nearest(x);
        let probe = prop_probe(&u, node, est.probe_h, est.slope_resolution)?;
        let series = probe.points.iter().map(|q| SeriesPoint { param: q.r, value: q.mass, lo: q.benchmarks[0], hi: q.benchmarks[2] }).collect();
        reports.push(EstimateReport::new(&format!("probe_{k}"), &label, json!({ "x": &grid.point(node)[..grid.dim], "h": probe.h, "hbar": probe.hbar, "r_max": probe.r_max }), series)?);
    }

    for r in &reports {
        let mut csv = Vec::new();
        r.write_csv(&mut csv)?;
        out.write(&format!("estimates/{}", r.csv_file_name(&date)), &csv)?;
        out.write(&format!("estimates/{}.json", r.name), (r.to_json()? + "\n").as_bytes())?;
    }
    info!("wrote {} estimate reports to {}", reports.len(), out.root().display());
    out.finish()
}
