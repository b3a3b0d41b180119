//! Convex functions on grids: envelopes, convexity checks, subgradients and the
//! Monge-Ampere measure.

mod envelope;
mod function;
mod measure;
mod subgradient;

pub use envelope::{is_discretely_convex, lower_convex_envelope, ConvexityCheck, StencilViolation};
pub use function::{ConvexGridFunction, FunctionMeta};
pub use measure::{ma_measure, ma_measure_on_box, MongeAmpereField};
pub use subgradient::{default_subgradient, default_tol_support, subgradient_extremes, support_defect, SubgradientSet};

use crate::grid::NodeKind;

/// `v = u + |x|^2 / 2`. Convexity certificates carry over.
pub fn add_half_square(u: &ConvexGridFunction) -> ConvexGridFunction {
    let grid = u.grid();
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            if u.in_domain(i) {
                let x = grid.point(i);
                u.value(i) + 0.5 * x[..grid.dim].iter().map(|t| t * t).sum::<f64>()
            } else {
                f64::NAN
            }
        })
        .collect();
    let mut v = u.with_values(values).expect("finite values stay finite");
    v.set_certified(u.is_certified());
    v
}

/// Central-difference Laplacian at interior nodes; NaN elsewhere.
pub fn discrete_laplacian(u: &ConvexGridFunction) -> Vec<f64> {
    let grid = u.grid();
    (0..grid.len())
        .map(|i| {
            if u.kind(i) != NodeKind::Interior {
                return f64::NAN;
            }
            let mut s = 0.0;
            for a in 0..grid.dim {
                let mut d = [0i64; 3];
                d[a] = 1;
                let f = grid.shift(i, d).unwrap();
                d[a] = -1;
                let b = grid.shift(i, d).unwrap();
                s += (u.value(f) - 2.0 * u.value(i) + u.value(b)) / (grid.spacing[a] * grid.spacing[a]);
            }
            s
        })
        .collect()
}
