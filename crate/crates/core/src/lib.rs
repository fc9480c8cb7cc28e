//! Trust-aware rating prediction.
//!
//! A weighted trust network is built from ratings and friendships
//! ([`network`]), scored with item similarity, friendship overlap and an
//! extended H-index ([`similarity`], [`centrality`]). Ratings are predicted by
//! biased random walks over that network ([`walker`]); when no walk finds a
//! rating but the walks met like-minded users, association rules over those
//! users' items produce fallback recommendations ([`assoc`]). [`evaluation`]
//! scores the whole pipeline with leave-one-out.

pub mod assoc;
pub mod centrality;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod network;
pub mod similarity;
pub mod synthetic;
pub mod view;
pub mod walker;

pub use assoc::{AssociationRule, FallbackRecommendation, RuleConfig};
pub use centrality::CentralityScore;
pub use data::{Dataset, ItemId, RatingScale, RatingTable, RatingView, SocialGraph, UserId};
pub use error::{Error, Result};
pub use evaluation::{EvalConfig, EvalReport, Outcome, Predictor};
pub use network::{NetworkConfig, TrustEdge, TrustNetwork, WalkGraph};
pub use walker::{BiasMode, PredictionKind, PredictionResult, WalkConfig, WalkOutcome};

/// A prediction, with fallback recommendations filled in when the walks
/// found no rating but met positively correlated users.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub prediction: PredictionResult,
    pub fallback: Vec<FallbackRecommendation>,
}

pub fn predict_or_recommend<G, R>(
    source: UserId,
    item: ItemId,
    graph: &G,
    ratings: &R,
    walk: &WalkConfig,
    rules: &RuleConfig,
) -> Result<Recommendation>
where
    G: WalkGraph + ?Sized,
    R: RatingView + ?Sized,
{
    let prediction = walker::predict(source, item, graph, ratings, walk)?;
    let fallback = if prediction.kind == PredictionKind::Fallback {
        match assoc::recommend_fallback(source, &prediction.visited_union, ratings, rules) {
            Ok(recs) => recs,
            // Fallback needs the source's interest threshold.
            Err(Error::Domain(_)) => Vec::new(),
            Err(e) => return Err(e),
        }
    } else {
        Vec::new()
    };
    Ok(Recommendation { prediction, fallback })
}
