//! Leave-one-out evaluation and its metrics.
//!
//! Each held-out rating is hidden behind a [`MaskedRatings`] view, wrapped in
//! an [`AuditedRatings`] that counts any access to the hidden value, and the
//! engine is asked to predict it. Predictions feed MAE and RMSE; anything else
//! counts as uncovered.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, ItemId, RatingTable, RatingView, UserId};
use crate::error::{Error, Result};
use crate::network::{NetworkConfig, PatchedNetwork, TrustNetwork};
use crate::similarity;
use crate::view::{AuditedRatings, MaskedRatings};
use crate::walker::{self, PredictionKind, WalkConfig};

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let total: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(total / actual.len() as f64)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let total: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((total / actual.len() as f64).sqrt())
}

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::domain("no predictions to score"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// `1 - rmse / rmse_max`. Negative when the error exceeds `rmse_max`.
pub fn precision_from_rmse(rmse: f64, rmse_max: f64) -> f64 {
    1.0 - rmse / rmse_max
}

/// Harmonic mean of precision and coverage, the latter as a fraction.
pub fn f_measure(precision: f64, coverage_fraction: f64) -> f64 {
    let denom = precision + coverage_fraction;
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * precision * coverage_fraction / denom
}

/// User-based CF: the source's mean plus the weighted mean offset of the
/// `k` most positively correlated raters of the item. Unclamped.
pub fn baseline_cf_pearson<R: RatingView + ?Sized>(source: UserId, item: ItemId, ratings: &R, k: usize) -> Option<f64> {
    let source_mean = mean_rating(source, ratings)?;
    let mut neighbors: Vec<(f64, UserId, f64)> = ratings
        .item_raters(item)
        .filter(|&(v, _)| v != source)
        .filter_map(|(v, r)| {
            let w = similarity::pearson(source, v, ratings).filter(|&w| w > 0.0)?;
            Some((w, v, r))
        })
        .collect();
    if neighbors.is_empty() {
        return None;
    }
    neighbors.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
    neighbors.truncate(k.max(1));
    let (mut num, mut den) = (0.0, 0.0);
    for (w, v, r) in neighbors {
        let mean_v = mean_rating(v, ratings).expect("rater has a rating");
        num += w * (r - mean_v);
        den += w.abs();
    }
    Some(source_mean + num / den)
}

fn mean_rating<R: RatingView + ?Sized>(user: UserId, ratings: &R) -> Option<f64> {
    let (sum, n) = ratings.user_ratings(user).fold((0.0, 0usize), |(s, n), (_, r)| (s + r, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Predicted(f64),
    /// No rating found, but association-rule fallback applies.
    Fallback,
    Uncovered,
}

/// Anything that can score a hidden rating.
pub trait Predictor: Sync {
    fn name(&self) -> &str;

    /// Predicts `user`'s rating of `item` reading only `view`. `seed` is
    /// derived per query by the harness.
    fn predict(&self, user: UserId, item: ItemId, view: &dyn RatingView, seed: u64) -> Result<Outcome>;
}

/// The biased-walk engine over a prebuilt network. Edges incident to the
/// query user are recomputed from the masked view for each query.
pub struct WalkerEngine<'a> {
    pub network: &'a TrustNetwork,
    pub config: WalkConfig,
}

impl Predictor for WalkerEngine<'_> {
    fn name(&self) -> &str {
        "cci-walker"
    }

    fn predict(&self, user: UserId, item: ItemId, view: &dyn RatingView, seed: u64) -> Result<Outcome> {
        let graph = PatchedNetwork { base: self.network, patch: self.network.patch_for_user(user, view) };
        let config = WalkConfig { seed, ..self.config };
        let res = walker::predict(user, item, &graph, view, &config)?;
        Ok(match (res.kind, res.value) {
            (PredictionKind::Predicted | PredictionKind::Known, Some(v)) => Outcome::Predicted(v),
            (PredictionKind::Fallback, _) => Outcome::Fallback,
            _ => Outcome::Uncovered,
        })
    }
}

/// Verification engine: rebuilds the whole network without the held-out
/// rating for every query. Slow.
pub struct RebuildEngine<'a> {
    pub dataset: &'a Dataset,
    pub network_config: NetworkConfig,
    pub config: WalkConfig,
}

impl Predictor for RebuildEngine<'_> {
    fn name(&self) -> &str {
        "cci-walker-rebuild"
    }

    fn predict(&self, user: UserId, item: ItemId, view: &dyn RatingView, seed: u64) -> Result<Outcome> {
        let ratings = RatingTable::from_triples(
            *view.scale(),
            self.dataset
                .ratings
                .users()
                .into_iter()
                .flat_map(|u| view.user_ratings(u).map(move |(i, r)| (u, i, r)).collect::<Vec<_>>()),
        )?;
        let reduced = Dataset::new(self.dataset.name.clone(), ratings, self.dataset.social.clone());
        let network = TrustNetwork::build(&reduced, self.network_config)?;
        let config = WalkConfig { seed, ..self.config };
        let res = walker::predict(user, item, &network, &reduced.ratings, &config)?;
        Ok(match (res.kind, res.value) {
            (PredictionKind::Predicted, Some(v)) => Outcome::Predicted(v),
            (PredictionKind::Fallback, _) => Outcome::Fallback,
            _ => Outcome::Uncovered,
        })
    }
}

pub struct BaselineEngine {
    pub k: usize,
}

impl Predictor for BaselineEngine {
    fn name(&self) -> &str {
        "cf-pearson"
    }

    fn predict(&self, user: UserId, item: ItemId, view: &dyn RatingView, _seed: u64) -> Result<Outcome> {
        Ok(match baseline_cf_pearson(user, item, view, self.k) {
            Some(v) => Outcome::Predicted(view.scale().clamp(v)),
            None => Outcome::Uncovered,
        })
    }
}

/// Test hook: answers from the full table, bypassing the view.
pub struct PerfectOracle<'a> {
    pub truth: &'a RatingTable,
}

impl Predictor for PerfectOracle<'_> {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, user: UserId, item: ItemId, _view: &dyn RatingView, _seed: u64) -> Result<Outcome> {
        Ok(self.truth.rating(user, item).map_or(Outcome::Uncovered, Outcome::Predicted))
    }
}

/// Never predicts.
pub struct NullEngine;

impl Predictor for NullEngine {
    fn name(&self) -> &str {
        "null"
    }

    fn predict(&self, _: UserId, _: ItemId, _: &dyn RatingView, _: u64) -> Result<Outcome> {
        Ok(Outcome::Uncovered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Share of users whose ratings are held out, in `(0, 1]`.
    pub fraction: f64,
    pub seed: u64,
    pub rmse_max: f64,
    /// Cap on held-out ratings, sampled uniformly under `seed`.
    pub max_queries: Option<usize>,
    /// Count fallback outcomes towards coverage. They never enter MAE/RMSE.
    pub fallback_covers: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { fraction: 1.0, seed: 42, rmse_max: 4.0, max_queries: None, fallback_covers: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub engine: String,
    pub fraction: f64,
    pub n_tested: usize,
    pub n_predicted: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    /// Percentage in `[0, 100]`.
    pub coverage: f64,
    pub precision: Option<f64>,
    pub f_measure: f64,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v:.4}"))
}

impl EvalReport {
    /// Report where exactly the predicted queries count as covered.
    pub fn from_pairs(dataset: &str, engine: &str, fraction: f64, n_tested: usize, pairs: &[(f64, f64)], rmse_max: f64) -> Self {
        Self::with_coverage(dataset, engine, fraction, n_tested, pairs.len(), pairs, rmse_max)
    }

    /// `pairs` are (actual, predicted); `n_covered` may exceed `pairs.len()`
    /// when covered outcomes without a value are counted.
    pub fn with_coverage(
        dataset: &str,
        engine: &str,
        fraction: f64,
        n_tested: usize,
        n_covered: usize,
        pairs: &[(f64, f64)],
        rmse_max: f64,
    ) -> Self {
        let (actual, predicted): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mae = mae(&actual, &predicted).ok();
        let rmse = rmse(&actual, &predicted).ok();
        let coverage = if n_tested == 0 { 0.0 } else { 100.0 * n_covered as f64 / n_tested as f64 };
        let precision = rmse.map(|r| precision_from_rmse(r, rmse_max));
        let f = precision.map_or(0.0, |p| f_measure(p, coverage / 100.0));
        EvalReport {
            dataset: dataset.to_string(),
            engine: engine.to_string(),
            fraction,
            n_tested,
            n_predicted: pairs.len(),
            mae,
            rmse,
            coverage,
            precision,
            f_measure: f,
        }
    }

    /// `dataset fraction n_tested n_predicted mae rmse coverage precision f_measure`
    pub fn machine_line(&self) -> String {
        format!(
            "{} {:.4} {} {} {} {} {:.4} {} {:.4}",
            self.dataset,
            self.fraction,
            self.n_tested,
            self.n_predicted,
            fmt_opt(self.mae),
            fmt_opt(self.rmse),
            self.coverage,
            fmt_opt(self.precision),
            self.f_measure
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("dataset", self.dataset.clone()),
            ("engine", self.engine.clone()),
            ("fraction", format!("{:.4}", self.fraction)),
            ("n_tested", self.n_tested.to_string()),
            ("n_predicted", self.n_predicted.to_string()),
            ("mae", fmt_opt(self.mae)),
            ("rmse", fmt_opt(self.rmse)),
            ("coverage", format!("{:.4}", self.coverage)),
            ("precision", fmt_opt(self.precision)),
            ("f_measure", format!("{:.4}", self.f_measure)),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<12} {v:>12}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooRun {
    pub report: EvalReport,
    /// Per query, in query order: (user, item, actual, outcome).
    pub outcomes: Vec<(UserId, ItemId, f64, Outcome)>,
    /// Reads of a held-out rating during its own prediction.
    pub leak_violations: usize,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Walk seed for one held-out (user, item) pair.
pub fn query_seed(seed: u64, user: UserId, item: ItemId) -> u64 {
    splitmix64(seed ^ splitmix64(((user.0 as u64) << 32) | item.0 as u64))
}

/// Held-out ratings for the sampled user split, sorted by (user, item).
pub fn sample_queries(ratings: &RatingTable, config: &EvalConfig) -> Result<Vec<(UserId, ItemId, f64)>> {
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::Config(format!("fraction must be in (0, 1], got {}", config.fraction)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut users = ratings.users();
    let take = ((users.len() as f64 * config.fraction).ceil() as usize).min(users.len());
    users.shuffle(&mut rng);
    users.truncate(take);
    users.sort_unstable();
    let mut queries: Vec<(UserId, ItemId, f64)> = users
        .iter()
        .flat_map(|&u| ratings.user_slice(u).iter().map(move |&(i, r)| (u, i, r)))
        .collect();
    if let Some(cap) = config.max_queries {
        if queries.len() > cap {
            queries.shuffle(&mut rng);
            queries.truncate(cap);
            queries.sort_by_key(|q| (q.0, q.1));
        }
    }
    if queries.is_empty() {
        return Err(Error::domain("the sampled split holds no ratings"));
    }
    Ok(queries)
}

pub fn loo_evaluate(dataset: &Dataset, config: &EvalConfig, engine: &dyn Predictor) -> Result<LooRun> {
    let queries = sample_queries(&dataset.ratings, config)?;
    let results: Vec<(Outcome, usize)> = queries
        .par_iter()
        .map(|&(u, i, _)| {
            let masked = MaskedRatings::new(&dataset.ratings, u, i);
            let audited = AuditedRatings::new(&masked, u, i);
            let outcome = engine.predict(u, i, &audited, query_seed(config.seed, u, i))?;
            Ok((outcome, audited.violations()))
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    let mut outcomes = Vec::with_capacity(queries.len());
    let mut leak_violations = 0;
    let mut covered = 0;
    for (&(u, i, actual), (outcome, leaks)) in queries.iter().zip(results) {
        match outcome {
            Outcome::Predicted(p) => {
                pairs.push((actual, p));
                covered += 1;
            }
            Outcome::Fallback if config.fallback_covers => covered += 1,
            _ => {}
        }
        leak_violations += leaks;
        outcomes.push((u, i, actual, outcome));
    }
    let report = EvalReport::with_coverage(
        &dataset.name,
        engine.name(),
        config.fraction,
        queries.len(),
        covered,
        &pairs,
        config.rmse_max,
    );
    Ok(LooRun { report, outcomes, leak_violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RatingScale, SocialGraph};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mae_rmse_examples() {
        let (a, p) = ([4.0, 3.0, 5.0], [3.5, 3.0, 4.0]);
        assert!(close(mae(&a, &p).unwrap(), 0.5, 1e-12));
        assert!(close(rmse(&a, &p).unwrap(), (1.25f64 / 3.0).sqrt(), 1e-12));
        assert!(close(rmse(&a, &p).unwrap(), 0.6455, 1e-4));
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&[1.0], &[5.0]).unwrap(), 4.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.5, 2.5]).unwrap(), 0.5);
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn precision_examples() {
        assert!(close(precision_from_rmse(0.5765, 4.0), 0.855875, 1e-12));
        assert!(close(precision_from_rmse(0.5955, 3.0), 0.8015, 1e-12));
        assert!(close(precision_from_rmse(0.5845, 9.0), 0.935055, 1e-5));
        assert!(precision_from_rmse(5.0, 4.0) < 0.0);
    }

    #[test]
    fn f_measure_examples() {
        assert!(close(f_measure(0.7, 0.7), 0.7, 1e-15));
        assert_eq!(f_measure(1.0, 0.0), 0.0);
        assert_eq!(f_measure(0.0, 0.0), 0.0);
        assert!(close(f_measure(0.8, 0.9), 0.8471, 1e-4));
    }

    fn table(triples: &[(u32, u32, f64)]) -> RatingTable {
        RatingTable::from_triples(RatingScale::five_star(), triples.iter().map(|&(u, i, r)| (UserId(u), ItemId(i), r))).unwrap()
    }

    #[test]
    fn baseline_perfect_proxy() {
        // User 2 mirrors user 1 exactly on items 1..3 and rated item 9.
        let t = table(&[(1, 1, 2.0), (1, 2, 3.0), (1, 3, 4.0), (2, 1, 2.0), (2, 2, 3.0), (2, 3, 4.0), (2, 9, 3.0)]);
        // Means: source 3, neighbor (2+3+4+3)/4 = 3, so the prediction is 3.
        assert!(close(baseline_cf_pearson(UserId(1), ItemId(9), &t, 10).unwrap(), 3.0, 1e-12));
        assert_eq!(baseline_cf_pearson(UserId(1), ItemId(77), &t, 10), None);
    }

    #[test]
    fn baseline_two_neighbors() {
        // Neighbor 2: pearson 1, offset +1. Neighbor 3: pearson 0.5, offset -1.
        // Source co-ratings with 3: (1,2,3) vs (1,3,2) -> pearson 0.5.
        let t = table(&[
            (1, 1, 1.0), (1, 2, 2.0), (1, 3, 3.0),
            (2, 1, 1.0), (2, 2, 2.0), (2, 3, 3.0), (2, 9, 3.0),
            (3, 1, 1.0), (3, 2, 3.0), (3, 3, 2.0), (3, 9, 1.0),
        ]);
        // mean_2 = 9/4 so offset = 0.75; mean_3 = 7/4 so offset = -0.75.
        let w2 = similarity::pearson(UserId(1), UserId(2), &t).unwrap();
        let w3 = similarity::pearson(UserId(1), UserId(3), &t).unwrap();
        assert!(close(w2, 1.0, 1e-12) && close(w3, 0.5, 1e-12));
        let expected = 2.0 + (1.0 * 0.75 + 0.5 * -0.75) / 1.5;
        assert!(close(baseline_cf_pearson(UserId(1), ItemId(9), &t, 10).unwrap(), expected, 1e-12));
    }

    fn small_dataset() -> Dataset {
        let t = table(&[(1, 1, 4.0), (1, 2, 3.0), (2, 1, 5.0), (2, 3, 2.0), (3, 2, 1.0), (3, 3, 4.0)]);
        Dataset::new("small", t, SocialGraph::new(false))
    }

    #[test]
    fn perfect_and_null_engines() {
        let d = small_dataset();
        let cfg = EvalConfig::default();
        let run = loo_evaluate(&d, &cfg, &PerfectOracle { truth: &d.ratings }).unwrap();
        let r = &run.report;
        assert_eq!((r.mae, r.rmse, r.coverage, r.precision), (Some(0.0), Some(0.0), 100.0, Some(1.0)));
        assert_eq!(r.f_measure, 1.0);

        let run = loo_evaluate(&d, &cfg, &NullEngine).unwrap();
        let r = &run.report;
        assert_eq!((r.coverage, r.f_measure, r.mae, r.rmse), (0.0, 0.0, None, None));
        assert!(r.machine_line().contains("nan"));
    }

    #[test]
    fn oracle_bypasses_view_but_harness_view_is_clean() {
        struct Leaky;
        impl Predictor for Leaky {
            fn name(&self) -> &str {
                "leaky"
            }
            fn predict(&self, u: UserId, i: ItemId, view: &dyn RatingView, _: u64) -> Result<Outcome> {
                Ok(view.rating(u, i).map_or(Outcome::Uncovered, Outcome::Predicted))
            }
        }
        let d = small_dataset();
        let run = loo_evaluate(&d, &EvalConfig::default(), &Leaky).unwrap();
        assert_eq!(run.report.n_predicted, 0);
        assert_eq!(run.leak_violations, 0);
    }

    #[test]
    fn fallback_coverage_switch() {
        struct FallbackOnUser1;
        impl Predictor for FallbackOnUser1 {
            fn name(&self) -> &str {
                "fb"
            }
            fn predict(&self, u: UserId, _: ItemId, _: &dyn RatingView, _: u64) -> Result<Outcome> {
                Ok(if u == UserId(1) { Outcome::Fallback } else { Outcome::Predicted(3.0) })
            }
        }
        let d = small_dataset();
        let off = loo_evaluate(&d, &EvalConfig::default(), &FallbackOnUser1).unwrap().report;
        let on = loo_evaluate(&d, &EvalConfig { fallback_covers: true, ..EvalConfig::default() }, &FallbackOnUser1)
            .unwrap()
            .report;
        // User 1 holds 2 of the 6 ratings.
        assert!(close(off.coverage, 400.0 / 6.0, 1e-9));
        assert_eq!(on.coverage, 100.0);
        assert_eq!((off.n_predicted, off.rmse), (on.n_predicted, on.rmse));
    }

    #[test]
    fn split_sampling() {
        let d = small_dataset();
        let cfg = EvalConfig { fraction: 0.25, ..EvalConfig::default() };
        let q = sample_queries(&d.ratings, &cfg).unwrap();
        // ceil(0.25 * 3) = 1 user with 2 ratings.
        assert_eq!(q.len(), 2);
        assert_eq!(q, sample_queries(&d.ratings, &cfg).unwrap());
        assert!(sample_queries(&d.ratings, &EvalConfig { fraction: 0.0, ..cfg }).is_err());
        let capped = sample_queries(&d.ratings, &EvalConfig { max_queries: Some(4), ..EvalConfig::default() }).unwrap();
        assert_eq!(capped.len(), 4);
        let empty = RatingTable::empty(RatingScale::five_star());
        assert!(sample_queries(&empty, &EvalConfig::default()).is_err());
    }

    #[test]
    fn report_rendering() {
        let r = EvalReport::from_pairs("d", "e", 0.5, 4, &[(4.0, 3.0), (2.0, 2.0)], 4.0);
        assert_eq!(r.coverage, 50.0);
        assert_eq!(r.machine_line(), "d 0.5000 4 2 0.5000 0.7071 50.0000 0.8232 0.6221");
        assert!(r.to_string().contains("coverage"));
    }
}
