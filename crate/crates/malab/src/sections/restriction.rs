use super::{maximal_height_with, default_h_res, extract_section};
use crate::convex::{default_subgradient, ConvexGridFunction};
use crate::error::{MalabError, Result};
use crate::grid::{Domain, GridSpec};

/// Restriction of a grid function to the coordinate hyperplane `{x_axis = offset}`.
#[derive(Debug, Clone)]
pub struct RestrictionFunction {
    pub parent: ConvexGridFunction,
    pub axis: usize,
    pub layer: usize,
    pub offset: f64,
    /// The restriction on the (n-1)-dimensional sub-grid.
    pub values: ConvexGridFunction,
    /// Sub-grid index of the base point.
    pub base: usize,
    /// Parent slope at the base point with the restricted axis dropped.
    pub base_slope: Vec<f64>,
    /// Maximal height of the parent at the base point.
    pub hbar_parent: f64,
}

fn drop_axis<T: Clone>(v: &[T], axis: usize) -> Vec<T> {
    v.iter().enumerate().filter(|(a, _)| *a != axis).map(|(_, x)| x.clone()).collect()
}

/// Restricts `u` to the hyperplane through the in-domain node `base_node`, normal to `axis`.
pub fn restrict(u: &ConvexGridFunction, axis: usize, base_node: usize) -> Result<RestrictionFunction> {
    let grid = u.grid();
    let dim = grid.dim;
    if dim < 2 || axis >= dim {
        return Err(MalabError::OutOfRange(format!("cannot restrict a {dim}-d grid along axis {axis}")));
    }
    if base_node >= grid.len() || !u.in_domain(base_node) {
        return Err(MalabError::NotInDomain { node: base_node });
    }
    let layer = grid.multi(base_node)[axis];
    let offset = grid.point(base_node)[axis];
    let domain = match &grid.domain {
        Domain::Box { center, half_widths } => Domain::Box {
            center: drop_axis(center, axis),
            half_widths: drop_axis(half_widths, axis),
        },
        Domain::Ball { center, radius } => Domain::Ball {
            center: drop_axis(center, axis),
            radius: (radius * radius - (offset - center[axis]).powi(2)).max(0.0).sqrt(),
        },
    };
    let sub = GridSpec::new(drop_axis(&grid.counts, axis), drop_axis(&grid.origin, axis), drop_axis(&grid.spacing, axis), domain)?;
    let parent_index = |j: usize| {
        let m = sub.multi(j);
        let mut full = [0usize; 3];
        let mut k = 0;
        for (a, f) in full.iter_mut().enumerate().take(dim) {
            if a == axis {
                *f = layer;
            } else {
                *f = m[k];
                k += 1;
            }
        }
        grid.index(full)
    };
    let values: Vec<f64> = (0..sub.len()).map(|j| if sub.in_domain(j) { u.value(parent_index(j)) } else { f64::NAN }).collect();
    let values = ConvexGridFunction::new(sub.clone(), values)?;
    let base = (0..sub.len()).find(|&j| parent_index(j) == base_node).expect("base node lies on its own layer");
    let hb = maximal_height_with(u, base_node, &default_subgradient(u, base_node)?, default_h_res(u))?;
    Ok(RestrictionFunction {
        parent: u.clone(),
        axis,
        layer,
        offset,
        base_slope: drop_axis(&hb.p, axis),
        hbar_parent: hb.hbar,
        values,
        base,
    })
}

/// Doubled John semi-lengths of the section of the restriction at sub-grid node `y`.
pub fn axis_lengths(w: &RestrictionFunction, y: usize, h: f64) -> Result<Vec<f64>> {
    let p = default_subgradient(&w.values, y)?;
    let s = extract_section(&w.values, y, &p, h)?;
    let john = s.john.ok_or_else(|| MalabError::Degenerate("empty section".into()))?;
    Ok(john.ellipsoid.semi_lengths.iter().map(|l| 2.0 * l).collect())
}

/// `w(y) + grad w(y).(b - y) + h >= hbar`, with `w` normalised to vanish to first
/// order at the base point `b`, at the default subgradient of `w` at `y`.
pub fn property_f(w: &RestrictionFunction, y: usize, h: f64) -> Result<bool> {
    let q = default_subgradient(&w.values, y)?;
    property_f_with(w, y, &q, h)
}

/// [`property_f`] with an explicit slope `q` of `w` at `y`.
pub fn property_f_with(w: &RestrictionFunction, y: usize, q: &[f64], h: f64) -> Result<bool> {
    let f = &w.values;
    let grid = f.grid();
    if y >= grid.len() || !f.in_domain(y) {
        return Err(MalabError::NotInDomain { node: y });
    }
    let b = grid.point(w.base);
    let yp = grid.point(y);
    let n = grid.dim;
    let lift = |z: &[f64; 3], val: f64| val - f.value(w.base) - (0..n).map(|a| w.base_slope[a] * (z[a] - b[a])).sum::<f64>();
    let wy = lift(&yp, f.value(y));
    let tangent_at_base = wy + (0..n).map(|a| (q[a] - w.base_slope[a]) * (b[a] - yp[a])).sum::<f64>();
    Ok(tangent_at_base + h >= w.hbar_parent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_agrees_with_parent() {
        let g = GridSpec::ball(3, 17, 1.0).unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2] + x[0] * x[2]).unwrap();
        let base = g.nearest(&[0.0, 0.0, 0.25]);
        let w = restrict(&u, 2, base).unwrap();
        assert_eq!(w.values.dim(), 2);
        for j in 0..w.values.grid().len() {
            let p = w.values.grid().point(j);
            let i = g.nearest(&[p[0], p[1], 0.25]);
            assert_eq!(w.values.in_domain(j), u.in_domain(i));
            if u.in_domain(i) {
                assert_eq!(w.values.value(j), u.value(i));
            }
        }
    }

    #[test]
    fn axis_lengths_of_quadratics() {
        let g = GridSpec::cube(3, 65, -1.0, 1.0).unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).unwrap();
        let o = g.nearest(&[0.0, 0.0, 0.0]);
        let w = restrict(&u, 2, o).unwrap();
        let h: f64 = 0.1;
        for d in axis_lengths(&w, w.base, h).unwrap() {
            assert!((d / (2.0 * (2.0 * h).sqrt()) - 1.0).abs() < 0.05, "{d}");
        }
        // the short axis needs a finer in-plane grid to resolve the 3:1 ratio
        let g = GridSpec::new(
            vec![129, 129, 3],
            vec![-1.0, -1.0, -1.0],
            vec![1.0 / 64.0, 1.0 / 64.0, 1.0],
            Domain::Box {
                center: vec![0.0; 3],
                half_widths: vec![1.0; 3],
            },
        )
        .unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + 9.0 * x[1] * x[1] + x[2] * x[2])).unwrap();
        let w = restrict(&u, 2, g.nearest(&[0.0, 0.0, 0.0])).unwrap();
        let d = axis_lengths(&w, w.base, 0.4).unwrap();
        assert!((d[0] / d[1] - 3.0).abs() < 0.3, "{d:?}");
    }

    #[test]
    fn property_f_at_base_reads_h_ge_hbar() {
        let g = GridSpec::ball(3, 33, 1.0).unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).unwrap();
        let o = g.nearest(&[0.0, 0.0, 0.0]);
        let w = restrict(&u, 2, o).unwrap();
        let hb = w.hbar_parent;
        assert!(property_f(&w, w.base, hb * 1.01).unwrap());
        assert!(!property_f(&w, w.base, hb * 0.99).unwrap());
        // off-centre y: the tangent plane of x'^2/2 at y evaluated at 0 is -|y|^2/2
        let y = w.values.grid().nearest(&[0.25, 0.25]);
        let q = [0.25, 0.25];
        assert!(property_f_with(&w, y, &q, hb + 0.0625 + 1e-9).unwrap());
        assert!(!property_f_with(&w, y, &q, hb + 0.0625 - 1e-9).unwrap());
    }

    #[test]
    fn property_f_trivial_when_hbar_vanishes() {
        let g = GridSpec::cube(3, 17, -1.0, 1.0).unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| x[0].abs()).unwrap();
        let w = restrict(&u, 2, g.nearest(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(w.hbar_parent, 0.0);
        for y in [0, 7, 40] {
            if w.values.in_domain(y) {
                assert!(property_f(&w, y, 1e-9).unwrap());
            }
        }
    }
}
