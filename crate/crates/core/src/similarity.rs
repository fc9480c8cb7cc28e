//! Pairwise user similarity: the Pearson gate over co-rated items, the
//! item impact factor, and the two friendship-overlap measures.
//!
//! `None` means the measure is undefined for the pair (empty co-rated set,
//! zero variance, no friends, ...). It is a value, not an error.

use crate::data::{RatingView, SocialGraph, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairSimilarity {
    pub pearson: Option<f64>,
    pub sim_item: Option<f64>,
    pub sim_con: Option<f64>,
    pub sim_deg: Option<f64>,
}

impl PairSimilarity {
    pub fn compute<R: RatingView + ?Sized>(a: UserId, b: UserId, ratings: &R, social: &SocialGraph) -> Self {
        let co = co_rated(a, b, ratings);
        PairSimilarity {
            pearson: pearson_of(&co),
            sim_item: sim_item_of(&co),
            sim_con: sim_con(a, b, social),
            sim_deg: sim_deg(a, b, social),
        }
    }
}

/// Ratings both users gave to the items they have in common, as (a, b) pairs
/// in item order.
pub fn co_rated<R: RatingView + ?Sized>(a: UserId, b: UserId, ratings: &R) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut left = ratings.user_ratings(a).peekable();
    let mut right = ratings.user_ratings(b).peekable();
    while let (Some(&(ia, ra)), Some(&(ib, rb))) = (left.peek(), right.peek()) {
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => {
                left.next();
            }
            std::cmp::Ordering::Greater => {
                right.next();
            }
            std::cmp::Ordering::Equal => {
                out.push((ra, rb));
                left.next();
                right.next();
            }
        }
    }
    out
}

/// Pearson correlation with means taken over the co-rated items only.
pub fn pearson<R: RatingView + ?Sized>(a: UserId, b: UserId, ratings: &R) -> Option<f64> {
    pearson_of(&co_rated(a, b, ratings))
}

pub fn pearson_of(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut num, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mean_a, y - mean_b);
        num += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return None;
    }
    Some((num / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

/// Sum of both users' ratings over the co-rated items, divided by the number
/// of co-rated items.
pub fn sim_item<R: RatingView + ?Sized>(a: UserId, b: UserId, ratings: &R) -> Option<f64> {
    sim_item_of(&co_rated(a, b, ratings))
}

pub fn sim_item_of(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    Some(pairs.iter().map(|&(x, y)| x + y).sum::<f64>() / pairs.len() as f64)
}

/// Share of `a`'s friends that are also friends of `b`. Asymmetric.
pub fn sim_con(a: UserId, b: UserId, social: &SocialGraph) -> Option<f64> {
    let fa = social.degree(a);
    if fa == 0 {
        return None;
    }
    Some(social.mutual_count(a, b) as f64 / fa as f64)
}

/// (deg(a) + deg(b)) / number of mutual friends.
pub fn sim_deg(a: UserId, b: UserId, social: &SocialGraph) -> Option<f64> {
    let mutual = social.mutual_count(a, b);
    if mutual == 0 {
        return None;
    }
    Some((social.degree(a) + social.degree(b)) as f64 / mutual as f64)
}
