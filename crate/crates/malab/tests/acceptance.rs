//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//! Criteria 8 to 10 share the two singular-example solves, which dominate the runtime.

mod common;

use std::time::{Duration, Instant};

use common::{cone_polar_area, interior_mass, random_convex_pl};
use malab::convex::{discrete_laplacian, ma_measure, ConvexGridFunction};
use malab::estimates::{
    ball_orlicz_ratio, cell_weights, decay_fit, dyadic_t_grid, level_integral, orlicz_integral, singular_ball_lower_bound, FitModel, SingularLine, Subdomain,
};
use malab::grid::{GridSpec, NodeKind};
use malab::sections::{maximal_height, verify_balancing, verify_engulfing, verify_volume_growth};
use malab::singular::cantor::lengths_exact;
use malab::singular::{
    assemble_example, calibrated_subsolution, control_run, lengths_f64, natural_cover_sum, separation_minimum, ExampleConfig, ExampleRun, SampleRegion, SpikeFunction,
};
use malab::solver::{default_tol_residual, solve_dirichlet, DirichletProblem};
use nalgebra::SymmetricEigen;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn solver_exactness() -> Outcome {
    let t = Instant::now();
    let grid = GridSpec::cube(2, 65, -1.0, 1.0).unwrap();
    let q = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
    let p = DirichletProblem::from_fns(grid.clone(), |_| 1.0, q, 2).unwrap();
    let (u, rep) = solve_dirichlet(&p, default_tol_residual(2), 200).unwrap();
    let err = (0..grid.len()).filter(|&i| u.in_domain(i)).map(|i| (u.value(i) - q(&grid.point_vec(i))).abs()).fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        rep.converged && err <= 1e-9 && el.as_secs_f64() <= 30.0,
        format!("max nodal error {err:.2e} (<= 1e-9), {} iterations, {:.2} s (<= 30 s)", rep.iterations, secs(el)),
    )
}

fn cone_mass() -> Outcome {
    let grid = GridSpec::ball(2, 129, 1.0).unwrap();
    let u = ConvexGridFunction::from_fn(grid.clone(), |x| (x[0] * x[0] + x[1] * x[1]).sqrt()).unwrap();
    let field = ma_measure(&u, 400).unwrap();
    let apex = grid.nearest(&[0.0, 0.0]);
    let rest = field.total - field.mass[apex];
    let rel = (field.mass[apex] / std::f64::consts::PI - 1.0).abs();
    outcome(rel <= 0.02 && rest <= 1e-3, format!("apex mass {:.5} (pi within {:.2}%, limit 2%), other nodes {rest:.2e} (<= 1e-3)", field.mass[apex], 100.0 * rel))
}

fn alexandrov() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    // smallest |Omega| |K_1(x0)| over apexes: the centred square, polar area 2
    let c2 = 4.0 * cone_polar_area([-1.0, -1.0], [1.0, 1.0], [0.0, 0.0]);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for case in 0..50 {
        let n = 4 + case % 6;
        let grid = GridSpec::cube(2, n, -1.0, 1.0).unwrap();
        let v = random_convex_pl(&grid, &mut rng);
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        let exact = interior_mass(&grid, &v);
        let u = ConvexGridFunction::new(grid.clone(), v).unwrap();
        let field = ma_measure(&u, 512).unwrap();
        let discrete = field.mass_of((0..grid.len()).filter(|&i| u.kind(i) == NodeKind::Interior));
        let bound = c2 * vmin * vmin;
        for mass in [exact, discrete] {
            let q = mass * 4.0 / bound;
            worst = worst.min(q);
            if q < 1.0 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("c(2) = {c2}, {violations} violations over 50 functions (exact and discrete mass), min ratio {worst:.3}"))
}

fn section_suite() -> Outcome {
    let q = |g: &GridSpec| ConvexGridFunction::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
    let g65 = GridSpec::cube(2, 65, -1.0, 1.0).unwrap();
    let u = q(&g65);
    let o = g65.nearest(&[0.0, 0.0]);
    let hbar = maximal_height(&u, o).unwrap().hbar;
    let hbar_ok = (hbar - 0.5).abs() <= 2.0 * g65.spacing[0];
    let deltas: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
    let delta = verify_engulfing(&u, o, 0.3, &deltas).unwrap();
    let delta_ok = delta.is_some_and(|d| (0.2..=0.3).contains(&d));
    let b = verify_balancing(&u, o, 0.2).unwrap();
    let bal_ok = [b.inner_scale, b.outer_scale].iter().all(|c| (0.8..=1.25).contains(c));
    let g = GridSpec::cube(2, 513, -1.0, 1.0).unwrap();
    let hs: Vec<f64> = (0..=8).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
    let growth = verify_volume_growth(&q(&g), g.nearest(&[0.0, 0.0]), &hs).unwrap();
    let (lo, hi) = growth.ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let growth_ok = hi / lo <= 1.1 && !growth.flagged;
    outcome(
        hbar_ok && delta_ok && bal_ok && growth_ok,
        format!(
            "hbar(0) {hbar:.4} (0.5 +- {:.4}), engulfing {delta:?} in [0.2, 0.3], balancing c {:.3} C {:.3} in [0.8, 1.25], growth ratio spread {:.4} (<= 1.1)",
            2.0 * g65.spacing[0],
            b.inner_scale,
            b.outer_scale,
            hi / lo
        ),
    )
}

fn cantor_exactness() -> Outcome {
    let t = Instant::now();
    let k_max = 25;
    let ex = lengths_exact(k_max);
    let int = |n: u64| BigRational::from_integer(BigInt::from(n));
    let l1_ok = ex.removed[1] == int(5) / int(6);
    let lower_fails: Vec<usize> = (1..=k_max)
        .filter(|&k| {
            let bound = BigRational::one() / (Pow::pow(int(2), k as u32) * Pow::pow(int(k as u64), 15u32));
            ex.survivor[k] < bound
        })
        .collect();
    let lower_ok = lower_fails.is_empty();
    let limit: Vec<f64> = (20..=k_max)
        .map(|k| {
            let q = &ex.survivor[k] * Pow::pow(int(2), k as u32) * Pow::pow(int(k as u64), 5u32);
            malab::singular::cantor::to_f64(&q)
        })
        .collect();
    let limit_ok = limit.iter().all(|v| (v / 120.0 - 1.0).abs() <= 0.1);
    let (_, big_l) = lengths_f64(k_max);
    let s15: Vec<f64> = (1..=k_max).map(|k| natural_cover_sum(big_l[k], k, 15.0)).collect();
    let s0: Vec<f64> = (1..=k_max).map(|k| natural_cover_sum(big_l[k], k, 0.0)).collect();
    let floor = 0.5 * s15[4];
    let eta15_ok = s15[4..].iter().all(|&s| s >= floor);
    let eta0_ok = s0.windows(2).all(|w| w[1] < w[0]) && s0[k_max - 1] < 0.05;
    let el = t.elapsed();
    outcome(
        l1_ok && lower_ok && limit_ok && eta15_ok && eta0_ok && secs(el) <= 1.0,
        format!(
            "l1 = 5/6 {l1_ok}, L_k >= 2^-k k^-15 {lower_ok} (fails at k = {lower_fails:?}), 2^k L_k k^5 for k >= 20 in [{:.2}, {:.2}], eta=15 min over k >= 5 {:.3e} vs floor {floor:.3e}, eta=0 at 25 {:.4}, {:.3} s",
            limit.iter().copied().fold(f64::INFINITY, f64::min),
            limit.iter().copied().fold(0.0, f64::max),
            s15[4..].iter().copied().fold(f64::INFINITY, f64::min),
            s0[k_max - 1],
            secs(el)
        ),
    )
}

fn subsolution_positivity() -> Outcome {
    let (w, _) = calibrated_subsolution().unwrap();
    let region = SampleRegion { lo: [1e-6, 1e-6], hi: [0.1, 0.1], z_max: 0.5 };
    let mut min_eig = f64::INFINITY;
    let mut min_det = f64::INFINITY;
    let mut worst_fd: f64 = 0.0;
    let mut fd_count = 0;
    for x in malab::singular::halton_points(&region, 10_000) {
        let h = w.hessian(x).unwrap();
        let e = SymmetricEigen::new(h).eigenvalues;
        let emax = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        min_eig = min_eig.min(e.iter().copied().fold(f64::INFINITY, f64::min) / emax);
        min_det = min_det.min(h.determinant());
        if x[0].abs() >= 1e-4 && x[1].abs() >= 1e-4 {
            let fd = w.fd_hessian(x).unwrap();
            worst_fd = worst_fd.max(malab::singular::subsolution::scaled_difference(&h, &fd));
            fd_count += 1;
        }
    }
    outcome(
        min_eig >= -1e-12 && min_det >= 1.0 && worst_fd <= 1e-4,
        format!("scale {:.4e}: min relative eigenvalue {min_eig:.3e}, min det {min_det:.4} (>= 1), FD agreement {worst_fd:.2e} (<= 1e-4) on {fd_count} points", w.scale),
    )
}

fn separation() -> Outcome {
    let v = SpikeFunction::new(20).unwrap();
    let at = |d: usize| separation_minimum(&v, d, 3, 10).unwrap();
    let c0 = at(6).ratio;
    let mins: Vec<f64> = (6..=10).map(|d| at(d).ratio).collect();
    let worst = at(10);
    let pass = mins.iter().all(|&m| m >= c0 / 2.0) && worst.ratio >= c0;
    outcome(
        pass,
        format!(
            "c0 (depth 6) {c0:.4}, minima depth 6..10 {:?}, depth-10 minimum at x = {:.6}, r = {:.3e} ({:?})",
            mins.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>(),
            worst.x,
            worst.r,
            worst.side
        ),
    )
}

struct Solved {
    run: ExampleRun,
    elapsed: Duration,
}

fn example(n: usize) -> Solved {
    let t = Instant::now();
    let run = assemble_example(&ExampleConfig { n, ..ExampleConfig::default() }).unwrap();
    Solved { run, elapsed: t.elapsed() }
}

fn end_to_end(runs: &[Solved]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in runs {
        let c = &s.run.checks;
        let ok = c.passed() && secs(s.elapsed) <= 1800.0;
        pass &= ok;
        let (_, ctrl) = control_run(c.n, default_tol_residual(3)).unwrap();
        pass &= ctrl.flagged == 0 && ctrl.solver.converged;
        parts.push(format!(
            "{}^3: comparison gap {:.2e} (>= {:.2e}), line deviation {:.2e} (<= {:.2e}), lines flagged {}/{}, {:.0} s; control flagged {}",
            c.n,
            c.min_comparison_gap,
            -5.0 * c.spacing,
            c.lines.iter().map(|l| l.max_affine_deviation).fold(0.0, f64::max),
            5.0 * c.spacing,
            c.lines.iter().map(|l| l.flagged).sum::<usize>(),
            c.lines.iter().map(|l| l.interior_nodes).sum::<usize>(),
            secs(s.elapsed),
            ctrl.flagged
        ));
        if !c.passed() {
            parts.push(format!("failed {:?}", c.failed()));
        }
    }
    outcome(pass, parts.join("; "))
}

/// Slab around the first-generation Cantor interval [5/12, 1/2] that holds the singular
/// line over `s = 1/2`. Both x1 faces lie where v is smooth, so no singular mass sits on a
/// clipped cell.
fn line_box() -> Subdomain {
    Subdomain::Box { lo: vec![0.3, -0.25, -0.5], hi: vec![0.7, 0.25, 0.5] }
}

fn divergence(runs: &[Solved]) -> Outcome {
    let region = line_box();
    let mut p20 = Vec::new();
    let mut p01 = Vec::new();
    let mut balls = 0;
    let mut violations = 0;
    for s in runs {
        let u = &s.run.u;
        let lap = discrete_laplacian(u);
        let wts = cell_weights(u.grid(), &region);
        p20.push(orlicz_integral(&lap, &wts, 20.0).unwrap());
        p01.push(orlicz_integral(&lap, &wts, 0.1).unwrap());
        let line = SingularLine { point: [0.5, 0.0, 0.0], direction: [0.0, 0.0, 1.0] };
        let radii = [0.1875, 0.25, 0.3125, 0.375];
        for x in [[0.5, 0.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.0, 0.25]] {
            let node = u.grid().nearest(&x);
            let bounds = if maximal_height(u, node).unwrap().singular {
                singular_ball_lower_bound(u, &lap, node, &radii, 20.0, Some(&line)).unwrap()
            } else {
                ball_orlicz_ratio(u, &lap, node, &radii, 20.0, None).unwrap()
            };
            balls += bounds.len();
            violations += bounds.iter().filter(|b| !b.jensen.holds).count();
        }
    }
    let g20 = p20[1] / p20[0] - 1.0;
    let g01 = (p01[1] / p01[0] - 1.0).abs();
    outcome(
        g20 >= 0.2 && g01 <= 0.05 && violations == 0,
        format!(
            "p = 20: {:.4e} -> {:.4e} ({:+.1}%, need >= +20%); p = 0.1: {:.4e} -> {:.4e} ({:.1}%, need <= 5%); Jensen violations {violations}/{balls}",
            p20[0],
            p20[1],
            100.0 * g20,
            p01[0],
            p01[1],
            100.0 * g01
        ),
    )
}

fn decay(runs: &[Solved]) -> Outcome {
    let u = &runs[runs.len() - 1].run.u;
    let lap = discrete_laplacian(u);
    let wts = cell_weights(u.grid(), &Subdomain::Whole);
    let ts = dyadic_t_grid(&lap, &wts, 50);
    let vals: Vec<f64> = ts.iter().map(|&t| level_integral(&lap, &wts, t)).collect();
    let monotone = vals.windows(2).all(|w| w[1] <= w[0]);
    let fit = decay_fit(&ts, &vals).unwrap();
    let lp = fit.log_power.as_ref().filter(|f| f.model == FitModel::LogPower);

    let grid = GridSpec::cube(2, 129, -1.0, 1.0).unwrap();
    let a = 3.0;
    let exact = |x: &[f64]| x.iter().map(|t| (a * t).exp()).sum::<f64>() / (a * a);
    let p = DirichletProblem::from_fns(grid.clone(), |x| (a * (x[0] + x[1])).exp(), exact, 2).unwrap();
    let (c, rep) = solve_dirichlet(&p, default_tol_residual(2), 200).unwrap();
    let clap = discrete_laplacian(&c);
    let cw = cell_weights(&grid, &Subdomain::Whole);
    let cts = dyadic_t_grid(&clap, &cw, 50);
    let cvals: Vec<f64> = cts.iter().map(|&t| level_integral(&clap, &cw, t)).collect();
    let cfit = decay_fit(&cts, &cvals).unwrap();
    let pw = cfit.power.as_ref();
    outcome(
        monotone && lp.is_some_and(|f| f.exponent > 0.0) && rep.converged && pw.is_some_and(|f| f.exponent > 0.0),
        format!(
            "singular {}^3 over {} t-values: nonincreasing {monotone}, log-power eps {:?} (residual {:?}); control exp(3x) t-power exponent {:?} (residual {:?})",
            u.grid().counts[0],
            ts.len(),
            lp.map(|f| f.exponent),
            lp.map(|f| f.residual),
            pw.map(|f| f.exponent),
            pw.map(|f| f.residual)
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |k: usize, name: &'static str, o: Outcome| {
        println!("criterion {k:>2} {name}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, name, o));
    };
    record(1, "solver exactness", solver_exactness());
    record(2, "cone mass", cone_mass());
    record(3, "alexandrov inequality", alexandrov());
    record(4, "section suite", section_suite());
    record(5, "cantor exactness", cantor_exactness());
    record(6, "subsolution positivity", subsolution_positivity());
    record(7, "separation", separation());
    let runs = vec![example(33), example(49)];
    record(8, "singular example", end_to_end(&runs));
    record(9, "divergence trend", divergence(&runs));
    record(10, "decay behaviour", decay(&runs));
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
