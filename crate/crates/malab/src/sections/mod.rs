//! Sections `S_h(x) = {y : u(y) < u(x) + p.(y - x) + h}` and their geometry.

mod checks;
mod restriction;
mod vitali;

pub use checks::{breadth, verify_balancing, verify_engulfing, verify_volume_growth, Balancing, VolumeGrowth};
pub use restriction::{axis_lengths, property_f, property_f_with, restrict, RestrictionFunction};
pub use vitali::{uncovered_section_nodes, vitali_balls, vitali_sections, Ball};

use serde::{Deserialize, Serialize};

use crate::convex::{default_subgradient, default_tol_support, support_defect, ConvexGridFunction};
use crate::error::{MalabError, Result};
use crate::geometry::{convex_hull, john_of_hull, Hull, JohnEllipsoid, P3};
use crate::grid::NodeKind;

#[derive(Debug, Clone)]
pub struct SectionDescriptor {
    pub base_node: usize,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub h: f64,
    pub members: Vec<usize>,
    pub hull: Hull,
    /// Member count times cell volume.
    pub volume: f64,
    pub hull_volume: f64,
    /// `None` for an empty section.
    pub john: Option<JohnEllipsoid>,
    /// No member is a boundary node.
    pub compactly_contained: bool,
}

/// Flat record written to section reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub h: f64,
    pub volume: f64,
    pub hull_volume: f64,
    pub semi_lengths: Vec<f64>,
    pub compact: bool,
    pub hbar: f64,
}

impl SectionDescriptor {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn semi_lengths(&self) -> Vec<f64> {
        self.john.as_ref().map(|j| j.ellipsoid.semi_lengths.clone()).unwrap_or_default()
    }

    pub fn report(&self, hbar: f64) -> SectionReport {
        SectionReport {
            x: self.x.clone(),
            p: self.p.clone(),
            h: self.h,
            volume: self.volume,
            hull_volume: self.hull_volume,
            semi_lengths: self.semi_lengths(),
            compact: self.compactly_contained,
            hbar,
        }
    }
}

/// `u(y) - u(x) - p.(y - x)` for every in-domain node, `+inf` outside.
pub(crate) fn height_field(u: &ConvexGridFunction, node: usize, p: &[f64]) -> Vec<f64> {
    let grid = u.grid();
    let x = grid.point(node);
    let ux = u.value(node);
    (0..grid.len())
        .map(|i| {
            if !u.in_domain(i) {
                return f64::INFINITY;
            }
            let y = grid.point(i);
            u.value(i) - ux - (0..grid.dim).map(|a| p[a] * (y[a] - x[a])).sum::<f64>()
        })
        .collect()
}

fn check_base(u: &ConvexGridFunction, node: usize, p: &[f64]) -> Result<()> {
    if node >= u.grid().len() || !u.in_domain(node) {
        return Err(MalabError::NotInDomain { node });
    }
    if p.len() != u.dim() {
        return Err(MalabError::SizeMismatch {
            expected: u.dim(),
            found: p.len(),
        });
    }
    let defect = support_defect(u, node, p);
    if defect > default_tol_support(u) {
        return Err(MalabError::NotSubgradient { node, defect });
    }
    Ok(())
}

pub(crate) fn section_from_heights(u: &ConvexGridFunction, node: usize, p: &[f64], h: f64, g: &[f64]) -> Result<SectionDescriptor> {
    let grid = u.grid();
    let dim = grid.dim;
    let members: Vec<usize> = (0..grid.len()).filter(|&i| g[i] < h).collect();
    let pts: Vec<P3> = members.iter().map(|&i| grid.point(i)).collect();
    let hull = convex_hull(&pts, dim);
    let john = if members.is_empty() { None } else { Some(john_of_hull(&hull)?) };
    let compactly_contained = members.iter().all(|&i| u.kind(i) != NodeKind::Boundary);
    Ok(SectionDescriptor {
        base_node: node,
        x: grid.point_vec(node),
        p: p.to_vec(),
        h,
        volume: members.len() as f64 * grid.cell_volume(),
        hull_volume: hull.volume,
        members,
        hull,
        john,
        compactly_contained,
    })
}

/// Section at `node` with slope `p` and height `h > 0`. A height below the grid
/// resolution yields a section containing only the base node.
pub fn extract_section(u: &ConvexGridFunction, node: usize, p: &[f64], h: f64) -> Result<SectionDescriptor> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(MalabError::NonPositiveHeight(h));
    }
    check_base(u, node, p)?;
    section_from_heights(u, node, p, h, &height_field(u, node, p))
}

/// As [`extract_section`] with the default subgradient at `node`.
pub fn extract_default_section(u: &ConvexGridFunction, node: usize, h: f64) -> Result<SectionDescriptor> {
    let p = default_subgradient(u, node)?;
    extract_section(u, node, &p, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalHeight {
    pub node: usize,
    pub p: Vec<f64>,
    pub hbar: f64,
    /// Boundary node where the minimum is attained.
    pub witness: Option<usize>,
    /// `hbar < h_res`: the section reaches the boundary at every resolvable height.
    pub singular: bool,
    pub h_res: f64,
}

/// Default singular threshold: the cube of the smallest spacing.
pub fn default_h_res(u: &ConvexGridFunction) -> f64 {
    u.grid().min_spacing().powi(3)
}

/// Largest `h` with `S_h(x)` free of boundary nodes, for a given slope. Exact on the
/// grid: `S_h` misses the boundary iff `h <= min_b u(b) - u(x) - p.(b - x)`.
pub fn maximal_height_with(u: &ConvexGridFunction, node: usize, p: &[f64], h_res: f64) -> Result<MaximalHeight> {
    check_base(u, node, p)?;
    let g = height_field(u, node, p);
    let mut hbar = f64::INFINITY;
    let mut witness = None;
    for (i, k) in u.kinds().iter().enumerate() {
        if *k == NodeKind::Boundary && g[i] < hbar {
            hbar = g[i];
            witness = Some(i);
        }
    }
    let hbar = hbar.max(0.0);
    Ok(MaximalHeight {
        node,
        p: p.to_vec(),
        hbar,
        witness,
        singular: hbar < h_res,
        h_res,
    })
}

/// [`maximal_height_with`] at the default subgradient and threshold.
pub fn maximal_height(u: &ConvexGridFunction, node: usize) -> Result<MaximalHeight> {
    let p = default_subgradient(u, node)?;
    maximal_height_with(u, node, &p, default_h_res(u))
}
