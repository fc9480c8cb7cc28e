//! H-index node importance, extended to credit sub-threshold neighbors that
//! are attached to high-degree nodes.
//!
//! For a node `v` with degree `d`, the threshold `k` is the floored mean
//! degree of its neighbors and every neighbor is worth `1/d`:
//!
//! * a neighbor with degree `>= k` contributes the full `1/d`;
//! * a neighbor below `k` contributes `1/(2d)` for each of *its* neighbors
//!   (other than `v`) whose degree reaches `k`;
//! * a neighbor below `k` with no such neighbors contributes nothing.

use rayon::prelude::*;

use crate::data::{SocialGraph, UserId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralityScore {
    pub node: UserId,
    pub threshold_k: usize,
    pub impact: f64,
    pub classic_hindex: usize,
}

/// How one neighbor counts towards a node's impact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborClass {
    /// Degree reaches the threshold.
    Qualifying,
    /// Below the threshold, with this many qualifying neighbors of its own.
    Bridging(usize),
    /// Below the threshold and surrounded by low-degree nodes.
    Insignificant,
}

pub fn avg_neighbor_degree(v: UserId, social: &SocialGraph) -> Result<usize> {
    let d = social.degree(v);
    if d == 0 {
        return Err(Error::domain(format!("user {v} has no neighbors")));
    }
    let total: usize = social.neighbors(v).iter().map(|&u| social.degree(u)).sum();
    Ok(total / d)
}

/// Largest `k` such that at least `k` neighbors have degree `>= k`.
pub fn classic_hindex(v: UserId, social: &SocialGraph) -> usize {
    let mut degrees: Vec<usize> = social.neighbors(v).iter().map(|&u| social.degree(u)).collect();
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    degrees.iter().enumerate().take_while(|&(idx, &deg)| deg > idx).count()
}

/// Classifies every neighbor of `v` against `v`'s threshold. Empty for
/// isolated nodes.
pub fn neighbor_classes(v: UserId, social: &SocialGraph) -> Vec<(UserId, NeighborClass)> {
    let Ok(k) = avg_neighbor_degree(v, social) else {
        return Vec::new();
    };
    social
        .neighbors(v)
        .iter()
        .map(|&u| {
            let class = if social.degree(u) >= k {
                NeighborClass::Qualifying
            } else {
                let strong = social
                    .neighbors(u)
                    .iter()
                    .filter(|&&w| w != v && social.degree(w) >= k)
                    .count();
                if strong > 0 {
                    NeighborClass::Bridging(strong)
                } else {
                    NeighborClass::Insignificant
                }
            };
            (u, class)
        })
        .collect()
}

/// Contribution of a single neighbor class when the focal node has degree `d`.
pub fn class_contribution(class: NeighborClass, d: usize) -> f64 {
    match class {
        NeighborClass::Qualifying => 1.0 / d as f64,
        NeighborClass::Bridging(n) => n as f64 / (2.0 * d as f64),
        NeighborClass::Insignificant => 0.0,
    }
}

pub fn impact_factor(v: UserId, social: &SocialGraph) -> f64 {
    let d = social.degree(v);
    if d == 0 {
        return 0.0;
    }
    let mut full = 0usize;
    let mut halves = 0usize;
    for (_, class) in neighbor_classes(v, social) {
        match class {
            NeighborClass::Qualifying => full += 1,
            NeighborClass::Bridging(n) => halves += n,
            NeighborClass::Insignificant => {}
        }
    }
    // Summing the counts first keeps e.g. 3 × 1/10 at exactly 0.3.
    (full as f64 + halves as f64 / 2.0) / d as f64
}

pub fn score(v: UserId, social: &SocialGraph) -> CentralityScore {
    CentralityScore {
        node: v,
        threshold_k: avg_neighbor_degree(v, social).unwrap_or(0),
        impact: impact_factor(v, social),
        classic_hindex: classic_hindex(v, social),
    }
}

/// Scores for every node of the graph, ascending by id.
pub fn all_scores(social: &SocialGraph) -> Vec<CentralityScore> {
    let nodes: Vec<UserId> = social.nodes().collect();
    nodes.par_iter().map(|&v| score(v, social)).collect()
}
