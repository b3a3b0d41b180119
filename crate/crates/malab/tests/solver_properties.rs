use malab::convex::ConvexGridFunction;
use malab::grid::{GridSpec, NodeKind};
use malab::solver::{discrete_ma_operator, solve_dirichlet, DirichletProblem};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operator_is_monotone_in_neighbours(seed in 0usize..10_000, bump in 1e-4f64..1e-1, a in 0.5f64..2.0) {
        let g = GridSpec::cube(2, 17, -1.0, 1.0).unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| 0.5 * (a * x[0] * x[0] + x[1] * x[1]) + 0.1 * x[0].powi(4)).unwrap();
        let interior: Vec<usize> = (0..g.len()).filter(|&i| u.kind(i) == NodeKind::Interior).collect();
        let node = interior[seed % interior.len()];
        let before = discrete_ma_operator(&u, 2).unwrap()[node];
        for di in -2i64..=2 {
            for dj in -2i64..=2 {
                let Some(nb) = g.shift(node, [di, dj, 0]) else { continue };
                if nb == node {
                    continue;
                }
                let mut vals = u.values().to_vec();
                vals[nb] += bump;
                let after = discrete_ma_operator(&u.with_values(vals).unwrap(), 2).unwrap()[node];
                prop_assert!(after >= before - 1e-12 * before.abs(), "neighbour {:?}: {} < {}", (di, dj), after, before);
            }
        }
    }

    #[test]
    fn comparison_of_solutions(c in 0.0f64..0.3, k in 1.0f64..2.0, tilt in -0.5f64..0.5) {
        let g = GridSpec::cube(2, 17, -1.0, 1.0).unwrap();
        let phi1 = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]) + tilt * x[0];
        let phi2 = |x: &[f64]| phi1(x) + c * (1.0 + x[1]);
        let f2 = |x: &[f64]| 1.0 + 0.5 * x[0] * x[0];
        let f1 = |x: &[f64]| k * f2(x);
        let tol = 1e-8;
        let (u1, r1) = solve_dirichlet(&DirichletProblem::from_fns(g.clone(), f1, phi1, 2).unwrap(), tol, 200).unwrap();
        let (u2, r2) = solve_dirichlet(&DirichletProblem::from_fns(g.clone(), f2, phi2, 2).unwrap(), tol, 200).unwrap();
        prop_assert!(r1.converged && r2.converged);
        for i in 0..g.len() {
            prop_assert!(u1.value(i) <= u2.value(i) + tol, "node {}: {} > {}", i, u1.value(i), u2.value(i));
        }
    }

    #[test]
    fn stencil_frame_quadratics_are_exact(a in 0.2f64..3.0, b in 0.2f64..3.0, px in -1.0f64..1.0, py in -1.0f64..1.0) {
        let g = GridSpec::cube(2, 17, -1.0, 1.0).unwrap();
        let q = |x: &[f64]| 0.5 * (a * x[0] * x[0] + b * x[1] * x[1]) + px * x[0] + py * x[1];
        let (u, rep) = solve_dirichlet(&DirichletProblem::from_fns(g.clone(), |_| a * b, q, 2).unwrap(), 1e-8, 200).unwrap();
        prop_assert!(rep.converged);
        for i in 0..g.len() {
            prop_assert!((u.value(i) - q(&g.point_vec(i))).abs() <= 1e-11 * (1.0 + a + b), "node {}: error {:e}, report {:?}", i, u.value(i) - q(&g.point_vec(i)), rep);
        }
    }
}

#[test]
fn anisotropic_exponential_converges_at_second_order() {
    // Hessian ratio up to e^12 across the box; the early iterates are far from convex
    let a = 3.0;
    let exact = |x: &[f64]| x.iter().map(|t| (a * t).exp()).sum::<f64>() / (a * a);
    let mut errs = Vec::new();
    for n in [33, 65] {
        let g = GridSpec::cube(2, n, -1.0, 1.0).unwrap();
        let p = DirichletProblem::from_fns(g.clone(), |x| (a * (x[0] + x[1])).exp(), exact, 2).unwrap();
        let (u, rep) = solve_dirichlet(&p, 1e-8, 200).unwrap();
        assert!(rep.converged, "{n}: {rep:?}");
        errs.push((0..g.len()).filter(|&i| u.in_domain(i)).map(|i| (u.value(i) - exact(&g.point_vec(i))).abs()).fold(0.0, f64::max));
    }
    assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
}
