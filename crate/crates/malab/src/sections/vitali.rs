use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{extract_section, SectionDescriptor};
use crate::convex::ConvexGridFunction;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn dist(&self, other: &Ball) -> f64 {
        self.center.iter().zip(&other.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.center.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= self.radius * self.radius
    }
}

fn largest_first(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

/// Greedy largest-first disjoint subfamily; the 5-fold dilations of the selected
/// balls cover every ball of the family.
pub fn vitali_balls(balls: &[Ball]) -> Vec<usize> {
    let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
    let mut chosen: Vec<usize> = Vec::new();
    for i in largest_first(&radii) {
        if chosen.iter().all(|&j| balls[i].dist(&balls[j]) >= balls[i].radius + balls[j].radius) {
            chosen.push(i);
        }
    }
    chosen
}

/// Greedy largest-height-first subfamily of sections with pairwise disjoint member sets.
pub fn vitali_sections(sections: &[SectionDescriptor]) -> Vec<usize> {
    let heights: Vec<f64> = sections.iter().map(|s| s.h).collect();
    let mut taken: HashSet<usize> = HashSet::new();
    let mut chosen = Vec::new();
    for i in largest_first(&heights) {
        if sections[i].members.iter().all(|m| !taken.contains(m)) {
            taken.extend(sections[i].members.iter().copied());
            chosen.push(i);
        }
    }
    chosen
}

/// Member nodes of the family not covered by the enlarged sections `S_{h/delta}` of
/// the selected ones.
pub fn uncovered_section_nodes(u: &ConvexGridFunction, sections: &[SectionDescriptor], selected: &[usize], delta: f64) -> Result<Vec<usize>> {
    let mut covered: HashSet<usize> = HashSet::new();
    for &j in selected {
        let s = &sections[j];
        covered.extend(extract_section(u, s.base_node, &s.p, s.h / delta)?.members);
    }
    let mut missing: Vec<usize> = sections.iter().flat_map(|s| s.members.iter().copied()).filter(|m| !covered.contains(m)).collect();
    missing.sort_unstable();
    missing.dedup();
    Ok(missing)
}
