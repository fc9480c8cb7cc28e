//! The trust network: which user pairs are connected and how strongly.
//!
//! Two users are linked when they are friends, share a friend, or co-rated at
//! least one item. Each directed edge `a → b` carries three components:
//!
//! * `alpha1`: the item impact factor, kept only when the Pearson gate is
//!   positive;
//! * `alpha2`: the share of `a`'s friends that `b` also has;
//! * `alpha3`: the centrality of `b`.
//!
//! and the combined weight `2·alpha1 + alpha2 + alpha3`. By default each
//! component is min-max scaled to `[0, 1]` over the whole network, which
//! bounds weights to `[0, 4]`.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;

use crate::centrality;
use crate::data::{Dataset, RatingView, SocialGraph, UserId};
use crate::error::{Error, Result};
use crate::similarity;

/// Upper bound of an edge weight when components are scaled.
pub const MAX_WEIGHT: f64 = 4.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Use raw component values instead of min-max scaling them.
    pub raw_weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PearsonSign {
    Positive,
    NonPositive,
    Undefined,
}

impl PearsonSign {
    pub fn of(p: Option<f64>) -> Self {
        match p {
            Some(x) if x > 0.0 => PearsonSign::Positive,
            Some(_) => PearsonSign::NonPositive,
            None => PearsonSign::Undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustEdge {
    pub from: UserId,
    pub to: UserId,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub weight: f64,
    pub pearson_sign: PearsonSign,
}

impl TrustEdge {
    pub fn new(from: UserId, to: UserId, alpha1: f64, alpha2: f64, alpha3: f64, sign: PearsonSign) -> Self {
        TrustEdge {
            from,
            to,
            alpha1,
            alpha2,
            alpha3,
            weight: combine(alpha1, alpha2, alpha3),
            pearson_sign: sign,
        }
    }
}

pub fn combine(alpha1: f64, alpha2: f64, alpha3: f64) -> f64 {
    2.0 * alpha1 + alpha2 + alpha3
}

/// Unscaled components of one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawComponents {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub pearson_sign: PearsonSign,
}

/// The (min, max) of one component over all edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn empty() -> Self {
        Range { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn include(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Maps `x` into `[0, 1]`. A degenerate range maps positive values to 1.
    pub fn scale(&self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else if x > 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub raw: bool,
    pub alpha1: Range,
    pub alpha2: Range,
    pub alpha3: Range,
}

impl Normalization {
    pub fn fit<'a>(raw: bool, comps: impl IntoIterator<Item = &'a RawComponents>) -> Self {
        let (mut r1, mut r2, mut r3) = (Range::empty(), Range::empty(), Range::empty());
        for c in comps {
            r1.include(c.alpha1);
            r2.include(c.alpha2);
            r3.include(c.alpha3);
        }
        Normalization { raw, alpha1: r1, alpha2: r2, alpha3: r3 }
    }

    pub fn apply(&self, from: UserId, to: UserId, c: &RawComponents) -> TrustEdge {
        if self.raw {
            TrustEdge::new(from, to, c.alpha1, c.alpha2, c.alpha3, c.pearson_sign)
        } else {
            TrustEdge::new(
                from,
                to,
                self.alpha1.scale(c.alpha1),
                self.alpha2.scale(c.alpha2),
                self.alpha3.scale(c.alpha3),
                c.pearson_sign,
            )
        }
    }

    /// Scales an alpha1 value computed after the network was built.
    pub fn scale_alpha1(&self, raw: f64) -> f64 {
        if self.raw {
            raw
        } else {
            self.alpha1.scale(raw)
        }
    }
}

/// Raw components of `a → b`. Undefined similarities contribute 0.
pub fn raw_components<R: RatingView + ?Sized>(
    a: UserId,
    b: UserId,
    ratings: &R,
    social: &SocialGraph,
    impact_of_b: f64,
) -> RawComponents {
    let co = similarity::co_rated(a, b, ratings);
    let (alpha1, sign) = gated_item_similarity(&co);
    RawComponents {
        alpha1,
        alpha2: similarity::sim_con(a, b, social).unwrap_or(0.0),
        alpha3: impact_of_b,
        pearson_sign: sign,
    }
}

fn gated_item_similarity(co: &[(f64, f64)]) -> (f64, PearsonSign) {
    let sign = PearsonSign::of(similarity::pearson_of(co));
    let alpha1 = match sign {
        PearsonSign::Positive => similarity::sim_item_of(co).unwrap_or(0.0),
        _ => 0.0,
    };
    (alpha1, sign)
}

/// Computes the scaled edge for `a → b` under an existing normalization.
pub fn compute_edge_weight(a: UserId, b: UserId, dataset: &Dataset, norms: &Normalization) -> TrustEdge {
    let impact = centrality::impact_factor(b, &dataset.social);
    norms.apply(a, b, &raw_components(a, b, &dataset.ratings, &dataset.social, impact))
}

/// Immutable weighted graph in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct TrustNetwork {
    nodes: Vec<UserId>,
    index: HashMap<UserId, usize>,
    offsets: Vec<usize>,
    edges: Vec<TrustEdge>,
    targets: Vec<usize>,
    reverse: Vec<Option<usize>>,
    /// Edge exists through friendship alone, independent of ratings.
    structural: Vec<bool>,
    out_sum: Vec<f64>,
    norms: Normalization,
}

impl TrustNetwork {
    pub fn build(dataset: &Dataset, config: NetworkConfig) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::domain("empty dataset"));
        }
        let users = dataset.users();
        let social = &dataset.social;
        let impacts: HashMap<UserId, f64> = users
            .par_iter()
            .map(|&u| (u, centrality::impact_factor(u, social)))
            .collect();
        let incoming = incoming_arcs(social);

        let per_user: Vec<Vec<(UserId, RawComponents, bool)>> = users
            .par_iter()
            .map(|&a| {
                let linked = structural_partners(a, social, &incoming);
                let mut cands: Vec<UserId> = linked.iter().copied().collect();
                for (item, _) in dataset.ratings.user_ratings(a) {
                    cands.extend(dataset.ratings.item_raters(item).map(|(b, _)| b));
                }
                cands.sort_unstable();
                cands.dedup();
                cands
                    .into_iter()
                    .filter(|&b| b != a)
                    .map(|b| {
                        let comps = raw_components(a, b, &dataset.ratings, social, impacts[&b]);
                        (b, comps, linked.contains(&b))
                    })
                    .collect()
            })
            .collect();

        let norms = Normalization::fit(config.raw_weights, per_user.iter().flatten().map(|(_, c, _)| c));
        let edges = users
            .iter()
            .zip(&per_user)
            .flat_map(|(&a, row)| row.iter().map(move |(b, c, s)| (norms.apply(a, *b, c), *s)));
        Ok(Self::assemble(users.clone(), edges, norms))
    }

    /// Builds a network from explicit, already-scaled components. Intended
    /// for hand-constructed graphs; every edge is treated as structural.
    pub fn from_edges(nodes: impl IntoIterator<Item = UserId>, edges: impl IntoIterator<Item = TrustEdge>) -> Self {
        let mut node_set: Vec<UserId> = nodes.into_iter().collect();
        let edges: Vec<TrustEdge> = edges.into_iter().collect();
        node_set.extend(edges.iter().flat_map(|e| [e.from, e.to]));
        node_set.sort_unstable();
        node_set.dedup();
        let norms = Normalization {
            raw: false,
            alpha1: Range { min: 0.0, max: 1.0 },
            alpha2: Range { min: 0.0, max: 1.0 },
            alpha3: Range { min: 0.0, max: 1.0 },
        };
        Self::assemble(node_set, edges.into_iter().map(|e| (e, true)), norms)
    }

    fn assemble(nodes: Vec<UserId>, edges: impl Iterator<Item = (TrustEdge, bool)>, norms: Normalization) -> Self {
        let index: HashMap<UserId, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut all: Vec<(TrustEdge, bool)> = edges.collect();
        all.sort_by_key(|(e, _)| (e.from, e.to));
        all.dedup_by_key(|(e, _)| (e.from, e.to));

        let n = nodes.len();
        let mut offsets = vec![0usize; n + 1];
        for (e, _) in &all {
            offsets[index[&e.from] + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<usize> = all.iter().map(|(e, _)| index[&e.to]).collect();
        let structural = all.iter().map(|(_, s)| *s).collect();
        let edges: Vec<TrustEdge> = all.into_iter().map(|(e, _)| e).collect();

        let mut net = TrustNetwork {
            nodes,
            index,
            offsets,
            edges,
            targets,
            reverse: Vec::new(),
            structural,
            out_sum: Vec::new(),
            norms,
        };
        net.reverse = (0..net.edges.len())
            .map(|e| net.find_edge(net.targets[e], net.source_of(e)))
            .collect();
        net.out_sum = (0..n).map(|u| net.out_range(u).map(|e| net.edges[e].weight).sum()).collect();
        net
    }

    fn source_of(&self, edge: usize) -> usize {
        self.index[&self.edges[edge].from]
    }

    pub fn nodes(&self) -> &[UserId] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[TrustEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &TrustEdge {
        &self.edges[e]
    }

    pub fn index_of(&self, user: UserId) -> Option<usize> {
        self.index.get(&user).copied()
    }

    pub fn user(&self, node: usize) -> UserId {
        self.nodes[node]
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norms
    }

    /// Edge ids leaving `node`, ordered by destination.
    pub fn out_range(&self, node: usize) -> std::ops::Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }

    pub fn out_edges(&self, user: UserId) -> &[TrustEdge] {
        match self.index_of(user) {
            Some(n) => &self.edges[self.out_range(n)],
            None => &[],
        }
    }

    pub fn target(&self, edge: usize) -> usize {
        self.targets[edge]
    }

    pub fn reverse(&self, edge: usize) -> Option<usize> {
        self.reverse[edge]
    }

    pub fn is_structural(&self, edge: usize) -> bool {
        self.structural[edge]
    }

    pub fn base_out_sum(&self, node: usize) -> f64 {
        self.out_sum[node]
    }

    pub fn find_edge(&self, from: usize, to: usize) -> Option<usize> {
        let range = self.out_range(from);
        let start = range.start;
        self.targets[range].binary_search(&to).ok().map(|off| start + off)
    }

    pub fn edge_between(&self, from: UserId, to: UserId) -> Option<&TrustEdge> {
        let e = self.find_edge(self.index_of(from)?, self.index_of(to)?)?;
        Some(&self.edges[e])
    }

    /// Writes one `<from> <to> <alpha1> <alpha2> <alpha3> <weight>` line per
    /// edge, sorted by (from, to), six decimals.
    pub fn write_export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(
                out,
                "{} {} {:.6} {:.6} {:.6} {:.6}",
                e.from, e.to, e.alpha1, e.alpha2, e.alpha3, e.weight
            )?;
        }
        Ok(())
    }

    /// Counts of edge weights in eight equal-width bins over `[0, 4]`; the
    /// last bin also takes anything above 4 (raw mode).
    pub fn weight_histogram(&self) -> [usize; 8] {
        let mut bins = [0usize; 8];
        for e in &self.edges {
            let b = ((e.weight / 0.5).floor() as isize).clamp(0, 7) as usize;
            bins[b] += 1;
        }
        bins
    }

    /// Recomputes every edge touching `user` against `ratings`, typically a
    /// view with one of the user's ratings hidden. Component scaling keeps
    /// the network-wide ranges of the original build.
    pub fn patch_for_user<R: RatingView + ?Sized>(&self, user: UserId, ratings: &R) -> NetworkPatch {
        let mut patch = NetworkPatch::default();
        let Some(u) = self.index_of(user) else {
            return patch;
        };
        let mut touched = vec![u];
        for e in self.out_range(u) {
            let v = self.targets[e];
            let co = similarity::co_rated(user, self.nodes[v], ratings);
            let (raw_alpha1, sign) = gated_item_similarity(&co);
            let alpha1 = self.norms.scale_alpha1(raw_alpha1);
            let removed = !self.structural[e] && co.is_empty();
            for edge in std::iter::once(e).chain(self.reverse[e]) {
                let old = &self.edges[edge];
                patch.edges.insert(
                    edge,
                    EdgeOverride {
                        alpha1,
                        weight: combine(alpha1, old.alpha2, old.alpha3),
                        pearson_sign: sign,
                        removed,
                    },
                );
            }
            touched.push(v);
        }
        for node in touched {
            let sum = self
                .out_range(node)
                .map(|e| match patch.edges.get(&e) {
                    Some(o) if o.removed => 0.0,
                    Some(o) => o.weight,
                    None => self.edges[e].weight,
                })
                .sum();
            patch.out_sum.insert(node, sum);
        }
        patch
    }
}

fn incoming_arcs(social: &SocialGraph) -> HashMap<UserId, Vec<UserId>> {
    let mut incoming: HashMap<UserId, Vec<UserId>> = HashMap::new();
    if social.is_directed() {
        for (a, b) in social.arcs() {
            incoming.entry(b).or_default().push(a);
        }
    }
    incoming
}

/// Users linked to `a` by friendship in either direction or by a mutual
/// friend.
fn structural_partners(
    a: UserId,
    social: &SocialGraph,
    incoming: &HashMap<UserId, Vec<UserId>>,
) -> HashSet<UserId> {
    let into = |u: UserId| -> &[UserId] {
        if social.is_directed() {
            incoming.get(&u).map(Vec::as_slice).unwrap_or(&[])
        } else {
            social.neighbors(u)
        }
    };
    let mut out: HashSet<UserId> = social.neighbors(a).iter().chain(into(a)).copied().collect();
    for &f in social.neighbors(a) {
        out.extend(into(f).iter().copied());
    }
    out.remove(&a);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeOverride {
    pub alpha1: f64,
    pub weight: f64,
    pub pearson_sign: PearsonSign,
    pub removed: bool,
}

/// Per-query replacements for a handful of edges.
#[derive(Debug, Clone, Default)]
pub struct NetworkPatch {
    edges: HashMap<usize, EdgeOverride>,
    out_sum: HashMap<usize, f64>,
}

impl NetworkPatch {
    pub fn edge(&self, e: usize) -> Option<&EdgeOverride> {
        self.edges.get(&e)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Read access to edge weights as the walker sees them.
pub trait WalkGraph: Sync {
    fn network(&self) -> &TrustNetwork;
    /// Current weight of an edge; 0 for removed edges.
    fn weight(&self, edge: usize) -> f64;
    fn is_live(&self, edge: usize) -> bool;
    /// Sum of live out-edge weights.
    fn out_sum(&self, node: usize) -> f64;
}

impl WalkGraph for TrustNetwork {
    fn network(&self) -> &TrustNetwork {
        self
    }

    fn weight(&self, edge: usize) -> f64 {
        self.edges[edge].weight
    }

    fn is_live(&self, _edge: usize) -> bool {
        true
    }

    fn out_sum(&self, node: usize) -> f64 {
        self.out_sum[node]
    }
}

/// A network with a patch layered on top.
pub struct PatchedNetwork<'a> {
    pub base: &'a TrustNetwork,
    pub patch: NetworkPatch,
}

impl WalkGraph for PatchedNetwork<'_> {
    fn network(&self) -> &TrustNetwork {
        self.base
    }

    fn weight(&self, edge: usize) -> f64 {
        match self.patch.edges.get(&edge) {
            Some(o) if o.removed => 0.0,
            Some(o) => o.weight,
            None => self.base.edges[edge].weight,
        }
    }

    fn is_live(&self, edge: usize) -> bool {
        !self.patch.edges.get(&edge).is_some_and(|o| o.removed)
    }

    fn out_sum(&self, node: usize) -> f64 {
        self.patch.out_sum.get(&node).copied().unwrap_or(self.base.out_sum[node])
    }
}
