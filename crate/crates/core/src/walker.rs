//! Biased random-walk rating prediction.
//!
//! A walk starts at the source user. At every node other than the source it
//! checks whether that user rated the target item; if so the walk returns the
//! rating. Otherwise it may stop, with a probability that grows with the
//! weight of the edge it arrived on and with the step count, or it moves to a
//! neighbor drawn in proportion to edge weight. Walks never take more than
//! `max_depth` steps.
//!
//! Many independent walks are aggregated into a [`PredictionResult`]: the
//! mean returned rating when any walk found one, otherwise a fallback signal
//! (some visited user correlates positively with the source) or
//! "cannot cover".

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ItemId, RatingView, UserId};
use crate::error::{Error, Result};
use crate::network::{WalkGraph, MAX_WEIGHT};
use crate::similarity;

/// Walks are generated and reduced in fixed-size chunks so that the early
/// stop decision never depends on scheduling.
const CHUNK: usize = 100;
const MIN_RATED_FOR_CONVERGENCE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasMode {
    /// Step probability proportional to the outgoing edge weight.
    Directional,
    /// Outgoing share plus the reverse edge's share at the neighbor,
    /// renormalized.
    #[default]
    SymmetricCci,
}

impl FromStr for BiasMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "directional" => Ok(BiasMode::Directional),
            "symmetric-cci" | "symmetric" | "cci" => Ok(BiasMode::SymmetricCci),
            other => Err(Error::Config(format!("unknown bias mode {other:?}"))),
        }
    }
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiasMode::Directional => "directional",
            BiasMode::SymmetricCci => "symmetric-cci",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub max_depth: usize,
    pub num_walks: usize,
    /// 0 disables early stopping.
    pub convergence_epsilon: f64,
    pub max_walks: usize,
    pub seed: u64,
    pub bias_mode: BiasMode,
    /// When false the sigmoid stop rule is switched off and walks only end
    /// on a rating, a sink, or the depth limit.
    pub stopping: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            max_depth: 6,
            num_walks: 1000,
            convergence_epsilon: 0.001,
            max_walks: 10_000,
            seed: 0x5eed,
            bias_mode: BiasMode::SymmetricCci,
            stopping: true,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.num_walks == 0 {
            return Err(Error::Config("num_walks must be at least 1".into()));
        }
        if self.num_walks > self.max_walks {
            return Err(Error::Config(format!(
                "num_walks ({}) exceeds max_walks ({})",
                self.num_walks, self.max_walks
            )));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon < 0.0 {
            return Err(Error::Config("convergence_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkKind {
    Rated,
    Stopped,
    DepthExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub kind: WalkKind,
    pub rating: Option<f64>,
    pub visited: Vec<UserId>,
    pub positive_pearson_seen: bool,
}

impl WalkOutcome {
    /// Number of edges traversed.
    pub fn steps(&self) -> usize {
        self.visited.len() - 1
    }

    /// `<walk#> <node,node,...> <outcome>` debug line.
    pub fn trace_line(&self, walk: usize) -> String {
        let path: Vec<String> = self.visited.iter().map(|u| u.to_string()).collect();
        let outcome = match (self.kind, self.rating) {
            (WalkKind::Rated, Some(r)) => format!("rated:{r:.4}"),
            (WalkKind::Stopped, _) => "stopped".into(),
            _ => "depth_exhausted".into(),
        };
        format!("{walk} {} {outcome}", path.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    /// The source already rated the item.
    Known,
    Predicted,
    Fallback,
    CannotCover,
}

impl fmt::Display for PredictionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionKind::Known => "known",
            PredictionKind::Predicted => "predicted",
            PredictionKind::Fallback => "fallback",
            PredictionKind::CannotCover => "cannot_cover",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub kind: PredictionKind,
    pub value: Option<f64>,
    pub walks_run: usize,
    pub walks_rated: usize,
    pub positive_pearson_seen: bool,
    pub visited_union: BTreeSet<UserId>,
}

/// Probability of ending the walk at an unrated node reached after `k` steps
/// over an edge whose weight, scaled to `[0, 1]`, is `edge_weight_scaled`.
pub fn stop_probability(edge_weight_scaled: f64, k: usize) -> f64 {
    let sigmoid = 1.0 / (1.0 + (-(k as f64)).exp());
    (edge_weight_scaled * sigmoid).clamp(0.0, 1.0)
}

/// Fills `out` with `(edge, probability)` for every possible next step from
/// `node`. Returns false when `node` is a sink.
fn fill_distribution<G: WalkGraph + ?Sized>(
    graph: &G,
    node: usize,
    mode: BiasMode,
    out: &mut Vec<(usize, f64)>,
) -> bool {
    out.clear();
    let net = graph.network();
    let own_sum = graph.out_sum(node);
    for e in net.out_range(node) {
        if !graph.is_live(e) {
            continue;
        }
        let score = match mode {
            BiasMode::Directional => graph.weight(e),
            BiasMode::SymmetricCci => {
                let forward = share(graph.weight(e), own_sum);
                let backward = net
                    .reverse(e)
                    .filter(|&r| graph.is_live(r))
                    .map_or(0.0, |r| share(graph.weight(r), graph.out_sum(net.target(e))));
                forward + backward
            }
        };
        out.push((e, score));
    }
    let total: f64 = out.iter().map(|p| p.1).sum();
    if total.is_nan() || total <= 0.0 {
        out.clear();
        return false;
    }
    for p in out.iter_mut() {
        p.1 /= total;
    }
    true
}

fn share(w: f64, sum: f64) -> f64 {
    if sum > 0.0 {
        w / sum
    } else {
        0.0
    }
}

/// Next-step distribution from `user` as `(neighbor, probability)`, ordered
/// by neighbor id. Errors on sinks and unknown users.
pub fn step_distribution<G: WalkGraph + ?Sized>(
    user: UserId,
    graph: &G,
    mode: BiasMode,
) -> Result<Vec<(UserId, f64)>> {
    let net = graph.network();
    let node = net.index_of(user).ok_or(Error::UnknownUser(user))?;
    let mut buf = Vec::new();
    if !fill_distribution(graph, node, mode, &mut buf) {
        return Err(Error::domain(format!("user {user} is a sink")));
    }
    Ok(buf.into_iter().map(|(e, p)| (net.edge(e).to, p)).collect())
}

fn sample(dist: &[(usize, f64)], rng: &mut impl Rng) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for &(e, p) in dist {
        acc += p;
        if x < acc {
            return e;
        }
    }
    // Rounding left `acc` just under 1; take the last edge with mass.
    dist.iter().rev().find(|p| p.1 > 0.0).map(|p| p.0).expect("distribution has mass")
}

/// Seeded generator for one walk; the stream depends only on `(seed, walk)`.
pub fn walk_rng(seed: u64, walk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walk as u64);
    rng
}

/// Runs a single walk from `source` looking for a rating of `item`.
pub fn single_walk<G, R>(
    source: UserId,
    item: ItemId,
    graph: &G,
    ratings: &R,
    config: &WalkConfig,
    rng: &mut impl Rng,
) -> Result<WalkOutcome>
where
    G: WalkGraph + ?Sized,
    R: RatingView + ?Sized,
{
    let net = graph.network();
    let start = net.index_of(source).ok_or(Error::UnknownUser(source))?;
    let mut dist = Vec::new();
    let mut node = start;
    let mut visited = vec![source];
    let mut arrived_weight = 0.0;
    let mut steps = 0;

    let kind = loop {
        let user = net.user(node);
        if node != start {
            if let Some(r) = ratings.rating(user, item) {
                let positive = any_positive(source, &visited, ratings);
                return Ok(WalkOutcome { kind: WalkKind::Rated, rating: Some(r), visited, positive_pearson_seen: positive });
            }
        }
        if steps == config.max_depth {
            break WalkKind::DepthExhausted;
        }
        if config.stopping && steps > 0 {
            let p = stop_probability((arrived_weight / MAX_WEIGHT).min(1.0), steps);
            if rng.random::<f64>() < p {
                break WalkKind::Stopped;
            }
        }
        if !fill_distribution(graph, node, config.bias_mode, &mut dist) {
            break WalkKind::DepthExhausted;
        }
        let e = sample(&dist, rng);
        arrived_weight = graph.weight(e);
        node = net.target(e);
        visited.push(net.user(node));
        steps += 1;
    };
    let positive = any_positive(source, &visited, ratings);
    Ok(WalkOutcome { kind, rating: None, visited, positive_pearson_seen: positive })
}

fn any_positive<R: RatingView + ?Sized>(source: UserId, visited: &[UserId], ratings: &R) -> bool {
    visited
        .iter()
        .filter(|&&v| v != source)
        .any(|&v| similarity::pearson(source, v, ratings).is_some_and(|p| p > 0.0))
}

/// Aggregates `config.num_walks` walks (fewer when the running mean
/// converges) into a prediction.
pub fn predict<G, R>(source: UserId, item: ItemId, graph: &G, ratings: &R, config: &WalkConfig) -> Result<PredictionResult>
where
    G: WalkGraph + ?Sized,
    R: RatingView + ?Sized,
{
    predict_inner(source, item, graph, ratings, config, None)
}

/// Like [`predict`], also returning every walk in index order.
pub fn predict_traced<G, R>(
    source: UserId,
    item: ItemId,
    graph: &G,
    ratings: &R,
    config: &WalkConfig,
) -> Result<(PredictionResult, Vec<WalkOutcome>)>
where
    G: WalkGraph + ?Sized,
    R: RatingView + ?Sized,
{
    let mut traces = Vec::new();
    let res = predict_inner(source, item, graph, ratings, config, Some(&mut traces))?;
    Ok((res, traces))
}

fn predict_inner<G, R>(
    source: UserId,
    item: ItemId,
    graph: &G,
    ratings: &R,
    config: &WalkConfig,
    mut traces: Option<&mut Vec<WalkOutcome>>,
) -> Result<PredictionResult>
where
    G: WalkGraph + ?Sized,
    R: RatingView + ?Sized,
{
    config.validate()?;
    if graph.network().index_of(source).is_none() {
        return Err(Error::UnknownUser(source));
    }
    if let Some(r) = ratings.rating(source, item) {
        return Ok(PredictionResult {
            kind: PredictionKind::Known,
            value: Some(r),
            walks_run: 0,
            walks_rated: 0,
            positive_pearson_seen: false,
            visited_union: BTreeSet::new(),
        });
    }

    let mut walks_run = 0;
    let mut rated = 0usize;
    let mut sum = 0.0;
    let mut positive = false;
    let mut visited_union = BTreeSet::new();
    let mut last_mean: Option<f64> = None;

    while walks_run < config.num_walks {
        let end = (walks_run + CHUNK).min(config.num_walks);
        let chunk: Vec<WalkOutcome> = (walks_run..end)
            .into_par_iter()
            .map(|w| single_walk(source, item, graph, ratings, config, &mut walk_rng(config.seed, w)))
            .collect::<Result<_>>()?;
        walks_run = end;
        for outcome in chunk {
            if let Some(r) = outcome.rating {
                rated += 1;
                sum += r;
            }
            positive |= outcome.positive_pearson_seen;
            visited_union.extend(outcome.visited.iter().copied());
            if let Some(t) = traces.as_deref_mut() {
                t.push(outcome);
            }
        }
        if config.convergence_epsilon > 0.0 && rated > 0 {
            let mean = sum / rated as f64;
            if rated >= MIN_RATED_FOR_CONVERGENCE {
                if let Some(prev) = last_mean {
                    if (mean - prev).abs() < config.convergence_epsilon {
                        break;
                    }
                }
            }
            last_mean = Some(mean);
        }
    }

    let (kind, value) = if rated > 0 {
        (PredictionKind::Predicted, Some(ratings.scale().clamp(sum / rated as f64)))
    } else if positive {
        (PredictionKind::Fallback, None)
    } else {
        (PredictionKind::CannotCover, None)
    };
    Ok(PredictionResult {
        kind,
        value,
        walks_run,
        walks_rated: rated,
        positive_pearson_seen: positive,
        visited_union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RatingScale, RatingTable};
    use crate::network::{PearsonSign, TrustEdge, TrustNetwork};

    fn u(x: u32) -> UserId {
        UserId(x)
    }

    /// Edge whose combined weight is `w` (split evenly over alpha2/alpha3).
    fn edge(a: u32, b: u32, w: f64) -> TrustEdge {
        TrustEdge::new(u(a), u(b), 0.0, w / 2.0, w / 2.0, PearsonSign::Undefined)
    }

    fn both(a: u32, b: u32, w: f64) -> [TrustEdge; 2] {
        [edge(a, b, w), edge(b, a, w)]
    }

    fn table(triples: &[(u32, u32, f64)]) -> RatingTable {
        RatingTable::from_triples(RatingScale::five_star(), triples.iter().map(|&(a, i, r)| (u(a), ItemId(i), r))).unwrap()
    }

    #[test]
    fn directional_normalizes_weights() {
        let net = TrustNetwork::from_edges([], [edge(0, 1, 0.4), edge(0, 2, 0.6), edge(0, 3, 1.0)]);
        let d = step_distribution(u(0), &net, BiasMode::Directional).unwrap();
        let probs: Vec<f64> = d.iter().map(|p| p.1).collect();
        for (got, want) in probs.iter().zip([0.2, 0.3, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn single_neighbor_is_certain() {
        let net = TrustNetwork::from_edges([], both(0, 1, 0.7));
        for mode in [BiasMode::Directional, BiasMode::SymmetricCci] {
            assert_eq!(step_distribution(u(0), &net, mode).unwrap(), vec![(u(1), 1.0)]);
        }
    }

    #[test]
    fn symmetric_triangle_is_uniform() {
        let edges: Vec<TrustEdge> = [(0, 1), (1, 2), (0, 2)].iter().flat_map(|&(a, b)| both(a, b, 2.0)).collect();
        let net = TrustNetwork::from_edges([], edges);
        for n in 0..3 {
            for (_, p) in step_distribution(u(n), &net, BiasMode::SymmetricCci).unwrap() {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sink_is_an_error() {
        let net = TrustNetwork::from_edges([u(0)], [edge(1, 2, 0.0)]);
        assert!(step_distribution(u(0), &net, BiasMode::Directional).is_err());
        assert!(step_distribution(u(1), &net, BiasMode::Directional).is_err());
        assert!(matches!(step_distribution(u(9), &net, BiasMode::Directional), Err(Error::UnknownUser(_))));
    }

    #[test]
    fn stop_probability_values() {
        assert_eq!(stop_probability(0.0, 1), 0.0);
        assert_eq!(stop_probability(0.0, 50), 0.0);
        assert!((stop_probability(1.0, 1) - 0.731_058_6).abs() < 1e-4);
        assert!(stop_probability(1.0, 40) > 1.0 - 1e-12);
        assert!(stop_probability(2.0, 40) <= 1.0);
    }

    #[test]
    fn one_step_hit() {
        let net = TrustNetwork::from_edges([], both(0, 1, 1.0));
        let ratings = table(&[(1, 9, 4.0)]);
        let cfg = WalkConfig::default();
        let out = single_walk(u(0), ItemId(9), &net, &ratings, &cfg, &mut walk_rng(1, 0)).unwrap();
        assert_eq!(out.kind, WalkKind::Rated);
        assert_eq!(out.rating, Some(4.0));
        assert_eq!(out.visited.len(), 2);
    }

    #[test]
    fn chain_exhausts_depth() {
        let edges: Vec<TrustEdge> = (0..8).flat_map(|a| both(a, a + 1, 1.0)).collect();
        let net = TrustNetwork::from_edges([], edges);
        let ratings = table(&[(8, 1, 2.0)]);
        let cfg = WalkConfig { stopping: false, bias_mode: BiasMode::Directional, ..WalkConfig::default() };
        for w in 0..50 {
            let out = single_walk(u(0), ItemId(99), &net, &ratings, &cfg, &mut walk_rng(3, w)).unwrap();
            assert_eq!(out.kind, WalkKind::DepthExhausted);
            assert_eq!(out.steps(), 6);
        }
    }

    #[test]
    fn isolated_source() {
        let net = TrustNetwork::from_edges([u(5)], []);
        let ratings = table(&[]);
        let out = single_walk(u(5), ItemId(1), &net, &ratings, &WalkConfig::default(), &mut walk_rng(0, 0)).unwrap();
        assert_eq!(out.kind, WalkKind::DepthExhausted);
        assert_eq!(out.visited, vec![u(5)]);
    }

    #[test]
    fn constant_outcome_prediction() {
        let edges: Vec<TrustEdge> = [(0, 1), (0, 2)].iter().flat_map(|&(a, b)| both(a, b, 1.0)).collect();
        let net = TrustNetwork::from_edges([], edges);
        let ratings = table(&[(1, 7, 5.0), (2, 7, 5.0)]);
        let res = predict(u(0), ItemId(7), &net, &ratings, &WalkConfig::default()).unwrap();
        assert_eq!(res.kind, PredictionKind::Predicted);
        assert_eq!(res.value, Some(5.0));
        assert_eq!(res.walks_rated, res.walks_run);
    }

    #[test]
    fn known_rating_short_circuits() {
        let net = TrustNetwork::from_edges([], both(0, 1, 1.0));
        let ratings = table(&[(0, 7, 2.0)]);
        let res = predict(u(0), ItemId(7), &net, &ratings, &WalkConfig::default()).unwrap();
        assert_eq!((res.kind, res.value, res.walks_run), (PredictionKind::Known, Some(2.0), 0));
    }

    #[test]
    fn unknown_source() {
        let net = TrustNetwork::from_edges([], both(0, 1, 1.0));
        let ratings = table(&[]);
        assert!(matches!(
            predict(u(42), ItemId(7), &net, &ratings, &WalkConfig::default()),
            Err(Error::UnknownUser(_))
        ));
    }

    #[test]
    fn anti_correlated_neighborhood_cannot_cover() {
        let net = TrustNetwork::from_edges([], both(0, 1, 1.0));
        // Users 0 and 1 disagree; nobody rated item 99.
        let ratings = table(&[(0, 1, 1.0), (0, 2, 5.0), (1, 1, 5.0), (1, 2, 1.0)]);
        let res = predict(u(0), ItemId(99), &net, &ratings, &WalkConfig::default()).unwrap();
        assert_eq!(res.kind, PredictionKind::CannotCover);
        assert_eq!(res.walks_rated, 0);
        assert!(!res.positive_pearson_seen);
    }

    #[test]
    fn positively_correlated_neighborhood_falls_back() {
        let net = TrustNetwork::from_edges([], both(0, 1, 1.0));
        let ratings = table(&[(0, 1, 1.0), (0, 2, 5.0), (1, 1, 2.0), (1, 2, 4.0)]);
        let res = predict(u(0), ItemId(99), &net, &ratings, &WalkConfig::default()).unwrap();
        assert_eq!(res.kind, PredictionKind::Fallback);
        assert!(res.visited_union.contains(&u(1)));
    }

    #[test]
    fn early_stop_is_deterministic() {
        let edges: Vec<TrustEdge> = [(0, 1), (0, 2), (1, 2)].iter().flat_map(|&(a, b)| both(a, b, 1.0)).collect();
        let net = TrustNetwork::from_edges([], edges);
        let ratings = table(&[(1, 7, 2.0), (2, 7, 4.0)]);
        let cfg = WalkConfig { num_walks: 5000, convergence_epsilon: 0.05, ..WalkConfig::default() };
        let a = predict(u(0), ItemId(7), &net, &ratings, &cfg).unwrap();
        let b = predict(u(0), ItemId(7), &net, &ratings, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.walks_run < 5000);
        assert_eq!(a.walks_run % CHUNK, 0);
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig::default().validate().is_ok());
        assert!(WalkConfig { max_depth: 0, ..WalkConfig::default() }.validate().is_err());
        assert!(WalkConfig { num_walks: 20_000, ..WalkConfig::default() }.validate().is_err());
        assert!(WalkConfig { convergence_epsilon: -1.0, ..WalkConfig::default() }.validate().is_err());
        assert_eq!("directional".parse::<BiasMode>().unwrap(), BiasMode::Directional);
        assert!("x".parse::<BiasMode>().is_err());
    }

    #[test]
    fn trace_line_format() {
        let o = WalkOutcome { kind: WalkKind::Rated, rating: Some(4.0), visited: vec![u(1), u(2)], positive_pearson_seen: false };
        assert_eq!(o.trace_line(3), "3 1,2 rated:4.0000");
    }
}
