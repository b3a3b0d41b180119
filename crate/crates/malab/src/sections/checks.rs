use serde::{Deserialize, Serialize};

use super::{extract_default_section, height_field, section_from_heights, SectionDescriptor};
use crate::convex::{default_subgradient, ConvexGridFunction};
use crate::error::{MalabError, Result};
use crate::geometry::sphere_directions;

/// Smallest width of the section hull over the configured direction set.
pub fn breadth(u: &ConvexGridFunction, node: usize, h: f64) -> Result<f64> {
    let s = extract_default_section(u, node, h)?;
    Ok(section_breadth(&s))
}

pub(crate) fn section_breadth(s: &SectionDescriptor) -> f64 {
    if s.hull.rank < s.hull.dim {
        return 0.0;
    }
    sphere_directions(s.hull.dim).iter().map(|d| s.hull.width(d)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrowth {
    pub heights: Vec<f64>,
    /// `|S_h| / h^{n/2}` per height.
    pub ratios: Vec<f64>,
    /// Ratio grows monotonically by more than 10x as `h` decreases.
    pub flagged: bool,
}

/// Ratio series `|S_h(x)| / h^{n/2}` at the default subgradient.
pub fn verify_volume_growth(u: &ConvexGridFunction, node: usize, heights: &[f64]) -> Result<VolumeGrowth> {
    let p = default_subgradient(u, node)?;
    let g = height_field(u, node, &p);
    let mut hs = heights.to_vec();
    hs.sort_by(|a, b| a.total_cmp(b));
    let half_n = u.dim() as f64 / 2.0;
    let mut ratios = Vec::with_capacity(hs.len());
    for &h in &hs {
        if !(h > 0.0) {
            return Err(MalabError::NonPositiveHeight(h));
        }
        let count = g.iter().filter(|&&v| v < h).count();
        ratios.push(count as f64 * u.grid().cell_volume() / h.powf(half_n));
    }
    let monotone = ratios.windows(2).all(|w| w[0] >= w[1]);
    let spread = ratios.first().zip(ratios.last()).map(|(a, b)| a / b).unwrap_or(1.0);
    Ok(VolumeGrowth {
        heights: hs,
        flagged: ratios.len() >= 2 && monotone && spread > 10.0,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Balancing {
    /// Largest `c` with `c (E - e) + x` inside the section hull.
    pub inner_scale: f64,
    /// Smallest `C` with the section hull inside `C (E - e) + x`.
    pub outer_scale: f64,
}

/// Balancing constants of the John ellipsoid of `S_h(x)` recentred at `x`.
pub fn verify_balancing(u: &ConvexGridFunction, node: usize, h: f64) -> Result<Balancing> {
    let s = extract_default_section(u, node, h)?;
    if !s.compactly_contained {
        return Err(MalabError::NotCompact { node, h });
    }
    let john = s.john.as_ref().ok_or_else(|| MalabError::Degenerate("empty section".into()))?;
    if john.rank < s.hull.dim {
        return Err(MalabError::Degenerate(format!("section has rank {}", john.rank)));
    }
    let e = &john.ellipsoid;
    let dim = s.hull.dim;
    let inner_scale = s
        .hull
        .facets
        .iter()
        .map(|f| {
            let slack = f.offset - (0..dim).map(|a| f.normal[a] * s.x[a]).sum::<f64>();
            slack / e.support(&f.normal[..dim])
        })
        .fold(f64::INFINITY, f64::min);
    let outer_scale = s.hull.vertices.iter().map(|v| e.gauge_about(&s.x, &v[..dim])).fold(0.0, f64::max);
    Ok(Balancing { inner_scale, outer_scale })
}

/// Largest listed `delta` such that every member `y` of `S_{delta h}(x)` has `2y - x`
/// in the hull of `S_h(x)` (the half-dilation about `x`). `None` if no listed value works.
pub fn verify_engulfing(u: &ConvexGridFunction, node: usize, h: f64, deltas: &[f64]) -> Result<Option<f64>> {
    let p = default_subgradient(u, node)?;
    let g = height_field(u, node, &p);
    let outer = section_from_heights(u, node, &p, h, &g)?;
    if !outer.compactly_contained {
        return Err(MalabError::NotCompact { node, h });
    }
    let grid = u.grid();
    let x = grid.point(node);
    let tol = 1e-9 * grid.max_spacing();
    let mut best: Option<f64> = None;
    for &d in deltas {
        if !(d > 0.0 && d <= 1.0) {
            return Err(MalabError::OutOfRange(format!("engulfing delta {d}")));
        }
        if best.is_some_and(|b| b >= d) {
            continue;
        }
        let ok = (0..grid.len()).filter(|&i| g[i] < d * h).all(|i| {
            let y = grid.point(i);
            let z = [2.0 * y[0] - x[0], 2.0 * y[1] - x[1], 2.0 * y[2] - x[2]];
            outer.hull.contains(&z, tol)
        });
        if ok {
            best = Some(d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn quad(g: &GridSpec, a: f64, b: f64) -> ConvexGridFunction {
        ConvexGridFunction::from_fn(g.clone(), |x| 0.5 * (a * x[0] * x[0] + b * x[1] * x[1])).unwrap()
    }

    fn deltas() -> Vec<f64> {
        (1..=50).map(|k| k as f64 / 100.0).collect()
    }

    #[test]
    fn quadratic_engulfing_near_quarter() {
        let g = GridSpec::cube(2, 65, -1.0, 1.0).unwrap();
        let o = g.nearest(&[0.0, 0.0]);
        let d = verify_engulfing(&quad(&g, 1.0, 1.0), o, 0.3, &deltas()).unwrap().unwrap();
        assert!((0.2..=0.3).contains(&d), "{d}");
        let d = verify_engulfing(&quad(&g, 1.0, 4.0), o, 0.3, &deltas()).unwrap().unwrap();
        assert!((0.2..=0.3).contains(&d), "{d}");
    }

    #[test]
    fn quadratic_balancing_near_one() {
        let g = GridSpec::cube(2, 65, -1.0, 1.0).unwrap();
        let o = g.nearest(&[0.0, 0.0]);
        let b = verify_balancing(&quad(&g, 1.0, 1.0), o, 0.2).unwrap();
        assert!(b.inner_scale > 0.8 && b.outer_scale < 1.25, "{b:?}");
        let b = verify_balancing(&quad(&g, 1.0, 9.0), o, 0.3).unwrap();
        assert!(b.inner_scale >= 0.5 && b.outer_scale <= 2.0, "{b:?}");
    }

    #[test]
    fn balancing_rejects_boundary_sections() {
        let g = GridSpec::cube(2, 17, -1.0, 1.0).unwrap();
        let o = g.nearest(&[0.0, 0.0]);
        assert!(matches!(verify_balancing(&quad(&g, 1.0, 1.0), o, 2.0), Err(MalabError::NotCompact { .. })));
    }

    #[test]
    fn ball_and_box_breadth() {
        let g = GridSpec::cube(2, 129, -1.0, 1.0).unwrap();
        let o = g.nearest(&[0.0, 0.0]);
        let h: f64 = 0.08;
        let b = breadth(&quad(&g, 1.0, 1.0), o, h).unwrap();
        assert!((b - 2.0 * (2.0 * h).sqrt()).abs() < 2.0 * g.spacing[0], "{b}");
        // u = max(|x1|/0.5, |x2|/0.25): section at height 1 is the box [-0.5,0.5]x[-0.25,0.25]
        let u = ConvexGridFunction::from_fn(g.clone(), |x| (2.0 * x[0].abs()).max(4.0 * x[1].abs())).unwrap();
        let b = breadth(&u, o, 1.0 + 1e-9).unwrap();
        assert!((b - 0.5).abs() < 1e-9, "{b}");
    }

    #[test]
    fn growth_ratio_constant_for_quadratic_and_flagged_for_slab() {
        let g = GridSpec::cube(2, 257, -1.0, 1.0).unwrap();
        let o = g.nearest(&[0.0, 0.0]);
        let hs = [0.005, 0.01, 0.02, 0.04, 0.08];
        let r = verify_volume_growth(&quad(&g, 1.0, 1.0), o, &hs).unwrap();
        for v in &r.ratios {
            assert!((v / (2.0 * std::f64::consts::PI) - 1.0).abs() < 0.1, "{v}");
        }
        assert!(!r.flagged);
        let g = GridSpec::cube(3, 33, -1.0, 1.0).unwrap();
        let u = ConvexGridFunction::from_fn(g.clone(), |x| x[0].abs()).unwrap();
        let r = verify_volume_growth(&u, g.nearest(&[0.0, 0.0, 0.0]), &[1e-3, 1e-2, 1e-1]).unwrap();
        assert!(r.flagged, "{r:?}");
    }
}
