//! Rectangular grids over box or ball domains.

use serde::{Deserialize, Serialize};

use crate::error::{MalabError, Result};

pub const MAX_DIM: usize = 3;

/// Upper bound on the number of nodes a grid may hold.
pub const MAX_NODES: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Domain {
    Box { center: Vec<f64>, half_widths: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Exterior,
    Boundary,
    Interior,
}

impl NodeKind {
    pub fn in_domain(self) -> bool {
        self != NodeKind::Exterior
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub counts: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub domain: Domain,
}

impl GridSpec {
    pub fn new(counts: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>, domain: Domain) -> Result<Self> {
        let grid = GridSpec {
            dim: counts.len(),
            counts,
            origin,
            spacing,
            domain,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with `count` nodes per axis spanning `[lo, hi]^dim`, domain equal to that box.
    pub fn cube(dim: usize, count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(MalabError::InvalidGrid(format!("bad cube [{lo}, {hi}] with {count} nodes")));
        }
        let h = (hi - lo) / (count - 1) as f64;
        let c = 0.5 * (lo + hi);
        Self::new(
            vec![count; dim],
            vec![lo; dim],
            vec![h; dim],
            Domain::Box {
                center: vec![c; dim],
                half_widths: vec![0.5 * (hi - lo); dim],
            },
        )
    }

    /// Grid over `[-radius, radius]^dim` masked to the centered ball.
    pub fn ball(dim: usize, count: usize, radius: f64) -> Result<Self> {
        if count < 2 || !(radius > 0.0) {
            return Err(MalabError::InvalidGrid(format!("bad ball radius {radius} with {count} nodes")));
        }
        let h = 2.0 * radius / (count - 1) as f64;
        Self::new(
            vec![count; dim],
            vec![-radius; dim],
            vec![h; dim],
            Domain::Ball {
                center: vec![0.0; dim],
                radius,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MalabError::InvalidGrid(m));
        if self.dim == 0 || self.dim > MAX_DIM {
            return bad(format!("dimension {} not in 1..=3", self.dim));
        }
        if self.counts.len() != self.dim || self.origin.len() != self.dim || self.spacing.len() != self.dim {
            return bad("axis vectors must have one entry per dimension".into());
        }
        let mut total: usize = 1;
        for (&n, &h) in self.counts.iter().zip(&self.spacing) {
            if n < 3 {
                return bad(format!("axis count {n} < 3"));
            }
            if !(h > 0.0) || !h.is_finite() {
                return bad(format!("spacing {h} must be positive and finite"));
            }
            total = total.checked_mul(n).filter(|&t| t <= MAX_NODES).ok_or_else(|| {
                MalabError::InvalidGrid(format!("grid exceeds {MAX_NODES} nodes"))
            })?;
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return bad("origin must be finite".into());
        }
        match &self.domain {
            Domain::Box { center, half_widths } => {
                if center.len() != self.dim || half_widths.len() != self.dim {
                    return bad("box parameters must have one entry per dimension".into());
                }
                if center.iter().any(|c| !c.is_finite()) || half_widths.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                    return bad("box half-widths must be positive and finite".into());
                }
            }
            Domain::Ball { center, radius } => {
                if center.len() != self.dim {
                    return bad("ball center must have one entry per dimension".into());
                }
                if center.iter().any(|c| !c.is_finite()) || !(*radius > 0.0) || !radius.is_finite() {
                    return bad("ball radius must be positive and finite".into());
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Counts padded to three axes with 1.
    pub fn counts3(&self) -> [usize; 3] {
        let mut c = [1; 3];
        c[..self.dim].copy_from_slice(&self.counts);
        c
    }

    /// Row-major strides: the first axis varies slowest.
    pub fn strides(&self) -> [usize; 3] {
        let c = self.counts3();
        [c[1] * c[2], c[2], 1]
    }

    pub fn index(&self, m: [usize; 3]) -> usize {
        let s = self.strides();
        m[0] * s[0] + m[1] * s[1] + m[2] * s[2]
    }

    pub fn multi(&self, idx: usize) -> [usize; 3] {
        let c = self.counts3();
        [idx / (c[1] * c[2]), (idx / c[2]) % c[1], idx % c[2]]
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + m[a] as f64 * self.spacing[a];
        }
        x
    }

    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        self.point(idx)[..self.dim].to_vec()
    }

    /// Node reached from `idx` by an integer offset, if it stays on the grid.
    pub fn shift(&self, idx: usize, d: [i64; 3]) -> Option<usize> {
        let m = self.multi(idx);
        let c = self.counts3();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = m[a] as i64 + d[a];
            if v < 0 || v >= c[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.index(out))
    }

    /// Nearest grid node to a point (clamped to the grid).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut m = [0usize; 3];
        for a in 0..self.dim {
            let t = ((x[a] - self.origin[a]) / self.spacing[a]).round();
            m[a] = t.clamp(0.0, (self.counts[a] - 1) as f64) as usize;
        }
        self.index(m)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let eps = 1e-9 * self.min_spacing();
        match &self.domain {
            Domain::Box { center, half_widths } => (0..self.dim).all(|a| (x[a] - center[a]).abs() <= half_widths[a] + eps),
            Domain::Ball { center, radius } => {
                let r2: f64 = (0..self.dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                r2.sqrt() <= radius + eps
            }
        }
    }

    pub fn in_domain(&self, idx: usize) -> bool {
        self.contains_point(&self.point(idx))
    }

    /// Classification of every node. Boundary nodes are in-domain nodes with an axis
    /// neighbour that is off the grid or outside the domain.
    pub fn node_kinds(&self) -> Vec<NodeKind> {
        let n = self.len();
        let inside: Vec<bool> = (0..n).map(|i| self.in_domain(i)).collect();
        (0..n)
            .map(|i| {
                if !inside[i] {
                    return NodeKind::Exterior;
                }
                for a in 0..self.dim {
                    for s in [-1i64, 1] {
                        let mut d = [0i64; 3];
                        d[a] = s;
                        match self.shift(i, d) {
                            Some(j) if inside[j] => {}
                            _ => return NodeKind::Boundary,
                        }
                    }
                }
                NodeKind::Interior
            })
            .collect()
    }

    /// Short label such as `33x33x33` used in file names.
    pub fn label(&self) -> String {
        self.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x")
    }

    /// Weight of the grid cell around `idx` that falls inside an axis-aligned box.
    pub fn cell_weight_in_box(&self, idx: usize, lo: &[f64], hi: &[f64]) -> f64 {
        let x = self.point(idx);
        let mut w = 1.0;
        for a in 0..self.dim {
            let h = self.spacing[a];
            let a0 = (x[a] - 0.5 * h).max(lo[a]);
            let a1 = (x[a] + 0.5 * h).min(hi[a]);
            w *= (a1 - a0).max(0.0);
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = GridSpec::cube(3, 5, -1.0, 1.0).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index(g.multi(i)), i);
        }
        assert_eq!(g.point(0), [-1.0, -1.0, -1.0]);
        assert_eq!(g.point(g.len() - 1), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn box_kinds() {
        let g = GridSpec::cube(2, 5, -1.0, 1.0).unwrap();
        let k = g.node_kinds();
        let interior = k.iter().filter(|&&k| k == NodeKind::Interior).count();
        assert_eq!(interior, 9);
        assert_eq!(k.iter().filter(|&&k| k == NodeKind::Boundary).count(), 16);
    }

    #[test]
    fn ball_masks_corners() {
        let g = GridSpec::ball(2, 9, 1.0).unwrap();
        let k = g.node_kinds();
        assert_eq!(k[0], NodeKind::Exterior);
        assert_eq!(k[g.nearest(&[0.0, 0.0])], NodeKind::Interior);
        assert_eq!(k[g.nearest(&[1.0, 0.0])], NodeKind::Boundary);
    }

    #[test]
    fn rejects_small_counts() {
        assert!(GridSpec::cube(2, 2, -1.0, 1.0).is_err());
        assert!(GridSpec::new(vec![3, 3], vec![0.0; 2], vec![0.0, 1.0], Domain::Ball { center: vec![0.0; 2], radius: 1.0 }).is_err());
    }

    #[test]
    fn cell_weights_halve_on_faces() {
        let g = GridSpec::cube(1, 5, 0.0, 1.0).unwrap();
        let total: f64 = (0..g.len()).map(|i| g.cell_weight_in_box(i, &[0.25], &[0.75])).sum();
        assert!((total - 0.5).abs() < 1e-15);
    }
}
