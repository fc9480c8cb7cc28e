//! Fallback recommendations from association rules mined over the item sets
//! of users a walk visited.

use std::collections::{BTreeSet, HashMap};

use crate::data::{ItemId, RatingView, UserId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    pub min_support: f64,
    pub min_confidence: f64,
    pub top_k: usize,
    /// Largest itemset the miner expands to.
    pub max_itemset_len: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig { min_support: 0.2, min_confidence: 0.5, top_k: 10, max_itemset_len: 4 }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_support) || !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Config("rule thresholds must lie in [0, 1]".into()));
        }
        if self.max_itemset_len < 2 {
            return Err(Error::Config("max_itemset_len must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestProfile {
    pub user: UserId,
    pub threshold: i64,
    pub liked_items: BTreeSet<ItemId>,
}

/// `A ⇒ B` with
/// `support = count(A ∪ B) / n`,
/// `confidence = count(A ∪ B) / count(A)` and
/// `lift = confidence / (count(B) / n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationRule {
    pub antecedent: Vec<ItemId>,
    pub consequent: Vec<ItemId>,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FallbackRecommendation {
    pub item: ItemId,
    /// Mean rating of the item among visited users who rated it.
    pub score_evidence: f64,
    /// Number of the target's items in the supporting rule's antecedent.
    pub overlap: usize,
    pub lift: f64,
    pub rule: AssociationRule,
}

impl FallbackRecommendation {
    pub fn line(&self) -> String {
        format!("{} {:.4} {} {:.4}", self.item, self.score_evidence, self.overlap, self.lift)
    }
}

/// Floor of the user's mean rating.
pub fn interest_threshold<R: RatingView + ?Sized>(user: UserId, ratings: &R) -> Result<i64> {
    let (sum, n) = ratings.user_ratings(user).fold((0.0, 0usize), |(s, n), (_, r)| (s + r, n + 1));
    if n == 0 {
        return Err(Error::domain(format!("user {user} has no ratings")));
    }
    Ok((sum / n as f64).floor() as i64)
}

pub fn interest_profile<R: RatingView + ?Sized>(user: UserId, ratings: &R) -> Result<InterestProfile> {
    let threshold = interest_threshold(user, ratings)?;
    let liked_items = ratings
        .user_ratings(user)
        .filter(|&(_, r)| r >= threshold as f64)
        .map(|(i, _)| i)
        .collect();
    Ok(InterestProfile { user, threshold, liked_items })
}

/// Transactions as bit columns: one bitset over transactions per item.
struct Columns {
    n: usize,
    words: usize,
    bits: HashMap<ItemId, Vec<u64>>,
}

impl Columns {
    fn new(transactions: &[BTreeSet<ItemId>]) -> Self {
        let n = transactions.len();
        let words = n.div_ceil(64);
        let mut bits: HashMap<ItemId, Vec<u64>> = HashMap::new();
        for (t, items) in transactions.iter().enumerate() {
            for &i in items {
                bits.entry(i).or_insert_with(|| vec![0; words])[t / 64] |= 1 << (t % 64);
            }
        }
        Columns { n, words, bits }
    }

    fn count(&self, itemset: &[ItemId]) -> usize {
        let mut acc = vec![u64::MAX; self.words];
        for i in itemset {
            match self.bits.get(i) {
                Some(col) => acc.iter_mut().zip(col).for_each(|(a, c)| *a &= c),
                None => return 0,
            }
        }
        if let Some(last) = acc.last_mut() {
            if !self.n.is_multiple_of(64) {
                *last &= (1u64 << (self.n % 64)) - 1;
            }
        }
        acc.iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn frequent(count: usize, n: usize, min_support: f64) -> bool {
    count > 0 && count as f64 / n as f64 >= min_support
}

/// Level-wise frequent-itemset expansion. Returns every frequent itemset
/// (sorted items) with its transaction count.
pub fn frequent_itemsets(
    transactions: &[BTreeSet<ItemId>],
    min_support: f64,
    max_len: usize,
) -> HashMap<Vec<ItemId>, usize> {
    let cols = Columns::new(transactions);
    let n = transactions.len();
    let mut out = HashMap::new();
    if n == 0 {
        return out;
    }
    let mut level: Vec<Vec<ItemId>> = {
        let mut items: Vec<ItemId> = cols.bits.keys().copied().collect();
        items.sort_unstable();
        items
            .into_iter()
            .filter_map(|i| {
                let c = cols.count(&[i]);
                frequent(c, n, min_support).then(|| {
                    out.insert(vec![i], c);
                    vec![i]
                })
            })
            .collect()
    };
    let mut len = 1;
    while !level.is_empty() && len < max_len {
        let mut next = Vec::new();
        for (x, a) in level.iter().enumerate() {
            for b in &level[x + 1..] {
                if a[..len - 1] != b[..len - 1] {
                    // Sorted level: no later itemset shares this prefix.
                    break;
                }
                let mut cand = a.clone();
                cand.push(b[len - 1]);
                let all_subsets_frequent = (0..cand.len()).all(|skip| {
                    let sub: Vec<ItemId> =
                        cand.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &i)| i).collect();
                    out.contains_key(&sub)
                });
                if !all_subsets_frequent {
                    continue;
                }
                let c = cols.count(&cand);
                if frequent(c, n, min_support) {
                    out.insert(cand.clone(), c);
                    next.push(cand);
                }
            }
        }
        next.sort();
        level = next;
        len += 1;
    }
    out
}

/// All rules `A ⇒ B` over frequent itemsets (up to `max_len` items) meeting
/// both thresholds, sorted by (antecedent, consequent).
pub fn mine_rules(
    transactions: &[BTreeSet<ItemId>],
    min_support: f64,
    min_confidence: f64,
    max_len: usize,
) -> Vec<AssociationRule> {
    let n = transactions.len();
    let sets = frequent_itemsets(transactions, min_support, max_len);
    let mut rules = Vec::new();
    for (itemset, &count) in &sets {
        let k = itemset.len();
        if k < 2 {
            continue;
        }
        // Every non-empty proper subset as antecedent.
        for mask in 1..(1u32 << k) - 1 {
            let (ante, cons): (Vec<_>, Vec<_>) =
                itemset.iter().enumerate().partition(|&(bit, _)| mask & (1 << bit) != 0);
            let ante: Vec<ItemId> = ante.into_iter().map(|(_, &i)| i).collect();
            let cons: Vec<ItemId> = cons.into_iter().map(|(_, &i)| i).collect();
            let confidence = count as f64 / sets[&ante] as f64;
            if confidence < min_confidence {
                continue;
            }
            let cons_support = sets[&cons] as f64 / n as f64;
            rules.push(AssociationRule {
                antecedent: ante,
                consequent: cons,
                support: count as f64 / n as f64,
                confidence,
                lift: confidence / cons_support,
            });
        }
    }
    rules.sort_by(|a, b| (&a.antecedent, &a.consequent).cmp(&(&b.antecedent, &b.consequent)));
    rules
}

/// `confidence / support(consequent)`; `None` when the consequent never
/// occurs.
pub fn lift(rule: &AssociationRule, transactions: &[BTreeSet<ItemId>]) -> Option<f64> {
    let n = transactions.len();
    let cons = transactions.iter().filter(|t| rule.consequent.iter().all(|i| t.contains(i))).count();
    if n == 0 || cons == 0 {
        return None;
    }
    Some(rule.confidence / (cons as f64 / n as f64))
}

/// Items the target has not rated, tied to the target's items by rules
/// mined over the visited users, whose mean visited rating reaches the
/// target's interest threshold. Ranked by antecedent overlap, then lift,
/// then item id, all descending.
pub fn recommend_fallback<R: RatingView + ?Sized>(
    target: UserId,
    visited: &BTreeSet<UserId>,
    ratings: &R,
    config: &RuleConfig,
) -> Result<Vec<FallbackRecommendation>> {
    config.validate()?;
    let threshold = interest_threshold(target, ratings)? as f64;
    let own: BTreeSet<ItemId> = ratings.user_ratings(target).map(|(i, _)| i).collect();
    let others: Vec<UserId> = visited.iter().copied().filter(|&v| v != target).collect();

    let transactions: Vec<BTreeSet<ItemId>> = others
        .iter()
        .map(|&v| ratings.user_ratings(v).map(|(i, _)| i).collect::<BTreeSet<_>>())
        .filter(|t| !t.is_empty())
        .collect();
    if transactions.is_empty() {
        return Ok(Vec::new());
    }

    let mut evidence_cache: HashMap<ItemId, Option<f64>> = HashMap::new();
    let mut evidence = |item: ItemId| -> Option<f64> {
        *evidence_cache.entry(item).or_insert_with(|| {
            let scores: Vec<f64> = others.iter().filter_map(|&v| ratings.rating(v, item)).collect();
            (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
        })
    };

    let mut best: HashMap<ItemId, FallbackRecommendation> = HashMap::new();
    let rules = mine_rules(&transactions, config.min_support, config.min_confidence, config.max_itemset_len);
    for rule in rules {
        if rule.lift < 1.0 || !rule.antecedent.iter().all(|i| own.contains(i)) {
            continue;
        }
        for &item in &rule.consequent {
            if own.contains(&item) {
                continue;
            }
            let Some(score) = evidence(item).filter(|&s| s >= threshold) else {
                continue;
            };
            let cand = FallbackRecommendation {
                item,
                score_evidence: score,
                overlap: rule.antecedent.len(),
                lift: rule.lift,
                rule: rule.clone(),
            };
            match best.get(&item) {
                Some(cur) if (cur.overlap, cur.lift) >= (cand.overlap, cand.lift) => {}
                _ => {
                    best.insert(item, cand);
                }
            }
        }
    }
    let mut recs: Vec<FallbackRecommendation> = best.into_values().collect();
    recs.sort_by(|a, b| {
        (b.overlap, b.lift, b.item)
            .partial_cmp(&(a.overlap, a.lift, a.item))
            .expect("lift is finite")
    });
    recs.truncate(config.top_k);
    Ok(recs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RatingScale, RatingTable};

    fn set(items: &[u32]) -> BTreeSet<ItemId> {
        items.iter().map(|&i| ItemId(i)).collect()
    }

    fn ids(items: &[u32]) -> Vec<ItemId> {
        items.iter().map(|&i| ItemId(i)).collect()
    }

    // A = 1, B = 2, C = 3
    fn abc() -> Vec<BTreeSet<ItemId>> {
        vec![set(&[1, 2]), set(&[1, 2, 3]), set(&[2, 3]), set(&[1, 3])]
    }

    #[test]
    fn threshold_examples() {
        let x = [(27, 3.0), (33, 4.0), (115, 2.0), (178, 4.0), (203, 5.0), (240, 5.0), (259, 4.0), (307, 3.0), (333, 4.0), (377, 3.0)];
        let t = RatingTable::from_triples(RatingScale::five_star(), x.iter().map(|&(i, r)| (UserId(1), ItemId(i), r))).unwrap();
        assert_eq!(interest_threshold(UserId(1), &t).unwrap(), 3);
        let p = interest_profile(UserId(1), &t).unwrap();
        assert_eq!(p.liked_items.len(), 9);

        let t = RatingTable::from_triples(RatingScale::five_star(), (0..4).map(|i| (UserId(1), ItemId(i), 5.0))).unwrap();
        assert_eq!(interest_threshold(UserId(1), &t).unwrap(), 5);

        let half = RatingScale::new(0.5, 4.0, 0.5, 3.0).unwrap();
        let t = RatingTable::from_triples(half, [(UserId(1), ItemId(1), 2.5)]).unwrap();
        assert_eq!(interest_threshold(UserId(1), &t).unwrap(), 2);
        assert!(interest_threshold(UserId(2), &t).is_err());
    }

    #[test]
    fn abc_fixture() {
        let rules = mine_rules(&abc(), 0.0, 0.0, 8);
        let a_b = rules.iter().find(|r| r.antecedent == ids(&[1]) && r.consequent == ids(&[2])).unwrap();
        assert_eq!(a_b.support, 0.5);
        assert_eq!(a_b.confidence, 2.0 / 3.0);
        assert!((a_b.lift - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(lift(a_b, &abc()), Some(a_b.lift));
    }

    #[test]
    fn impossible_support() {
        assert!(mine_rules(&abc(), 1.0, 0.0, 8).is_empty());
    }

    #[test]
    fn single_transaction() {
        let rules = mine_rules(&[set(&[1, 2])], 0.0, 0.0, 8);
        assert_eq!(rules.len(), 2);
        for r in &rules {
            assert_eq!((r.support, r.confidence, r.lift), (1.0, 1.0, 1.0));
        }
        assert_eq!(rules[0].antecedent, ids(&[1]));
        assert_eq!(rules[1].antecedent, ids(&[2]));
    }

    #[test]
    fn lift_independent_and_nested() {
        // P(A) = P(B) = 0.5, P(AB) = 0.25.
        let t = vec![set(&[1, 2]), set(&[1]), set(&[2]), set(&[9])];
        let rules = mine_rules(&t, 0.0, 0.0, 8);
        let r = rules.iter().find(|r| r.antecedent == ids(&[1]) && r.consequent == ids(&[2])).unwrap();
        assert_eq!(r.lift, 1.0);

        // B only alongside A, P(A) = 0.5: lift(A ⇒ B) = 1 / P(A) = 2.
        let t = vec![set(&[1, 2]), set(&[1]), set(&[3]), set(&[3])];
        let rules = mine_rules(&t, 0.0, 0.0, 8);
        let r = rules.iter().find(|r| r.antecedent == ids(&[1]) && r.consequent == ids(&[2])).unwrap();
        assert_eq!(r.lift, 2.0);
    }

    #[test]
    fn lift_undefined_without_consequent() {
        let rule = AssociationRule { antecedent: ids(&[1]), consequent: ids(&[7]), support: 0.0, confidence: 0.0, lift: 0.0 };
        assert_eq!(lift(&rule, &abc()), None);
    }

    /// Target user 1 with the ten-item profile; visited users 10..=13.
    /// Item 70's visited ratings are 2, `rating_70` and 3.
    fn scenario(rating_70: f64) -> (RatingTable, BTreeSet<UserId>) {
        let x_items = [(27, 3.0), (33, 4.0), (115, 2.0), (178, 4.0), (203, 5.0), (240, 5.0), (259, 4.0), (307, 3.0), (333, 4.0), (377, 3.0)];
        let mut triples: Vec<(UserId, ItemId, f64)> = x_items.iter().map(|&(i, r)| (UserId(1), ItemId(i), r)).collect();
        let visited_profiles: [&[(u32, f64)]; 4] = [
            &[(27, 4.0), (33, 3.0), (115, 4.0), (178, 5.0), (70, 2.0), (80, 4.0)],
            &[(27, 3.0), (33, 5.0), (115, 3.0), (70, rating_70), (80, 4.0), (12, 2.0)],
            &[(203, 4.0), (333, 4.0), (27, 3.0), (70, 3.0)],
            &[(500, 2.0), (501, 1.0)],
        ];
        for (k, prof) in visited_profiles.iter().enumerate() {
            for &(i, r) in prof.iter() {
                triples.push((UserId(10 + k as u32), ItemId(i), r));
            }
        }
        let t = RatingTable::from_triples(RatingScale::five_star(), triples).unwrap();
        let visited = [1, 10, 11, 12, 13].iter().map(|&u| UserId(u)).collect();
        (t, visited)
    }

    #[test]
    fn recommends_related_item() {
        let (t, visited) = scenario(4.0);
        let recs = recommend_fallback(UserId(1), &visited, &t, &RuleConfig::default()).unwrap();
        let items: Vec<u32> = recs.iter().map(|r| r.item.0).collect();
        assert!(items.contains(&70), "{items:?}");
        for r in &recs {
            assert!(t.rating(UserId(1), r.item).is_none());
            assert!(r.score_evidence >= 3.0);
            assert!(r.lift >= 1.0);
            assert!(r.rule.antecedent.iter().all(|i| t.rating(UserId(1), *i).is_some()));
        }
        for pair in recs.windows(2) {
            assert!((pair[0].overlap, pair[0].lift) >= (pair[1].overlap, pair[1].lift));
        }
    }

    #[test]
    fn below_threshold_candidate_skipped() {
        // Visited mean for item 70 is (2 + 2.5 + 3) / 3 = 2.5, half a point
        // under the threshold of 3; item 80 from the next rules remains.
        let (t, visited) = scenario(2.5);
        let recs = recommend_fallback(UserId(1), &visited, &t, &RuleConfig::default()).unwrap();
        let items: Vec<u32> = recs.iter().map(|r| r.item.0).collect();
        assert!(!items.contains(&70));
        assert!(items.contains(&80));
    }

    #[test]
    fn nothing_novel_gives_empty() {
        let t = RatingTable::from_triples(
            RatingScale::five_star(),
            [(1, 1, 4.0), (1, 2, 4.0), (2, 1, 4.0), (2, 2, 5.0)].map(|(u, i, r)| (UserId(u), ItemId(i), r)),
        )
        .unwrap();
        let visited = [UserId(1), UserId(2)].into_iter().collect();
        assert!(recommend_fallback(UserId(1), &visited, &t, &RuleConfig::default()).unwrap().is_empty());
    }
}
