//! Canonical data model: identifiers, rating scale, the sparse rating table,
//! the friendship graph and dataset-level statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The rating range in force for a dataset, plus the maximum error used to
/// normalize RMSE into a precision score.
///
/// `step == 0` means ratings are continuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub rmse_max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64, step: f64, rmse_max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Config(format!("rating scale needs min < max, got [{min}, {max}]")));
        }
        if !(step >= 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("rating step must be >= 0, got {step}")));
        }
        if step > 0.0 {
            let steps = (max - min) / step;
            if (steps - steps.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "range [{min}, {max}] is not a whole number of {step} steps"
                )));
            }
        }
        if !(rmse_max > 0.0 && rmse_max.is_finite()) {
            return Err(Error::Config(format!("rmse_max must be > 0, got {rmse_max}")));
        }
        Ok(RatingScale { min, max, step, rmse_max })
    }

    /// Integer ratings 1..=5 with a maximum error of 4.
    pub fn five_star() -> Self {
        RatingScale { min: 1.0, max: 5.0, step: 1.0, rmse_max: 4.0 }
    }

    pub fn contains(&self, rating: f64) -> bool {
        rating >= self.min && rating <= self.max
    }

    pub fn clamp(&self, rating: f64) -> f64 {
        rating.clamp(self.min, self.max)
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self::five_star()
    }
}

/// A sorted run of `(key, rating)` pairs, optionally hiding one key.
///
/// This is what a [`RatingView`] hands out for a user's profile or an item's
/// raters; masking one key lets a view hide a single rating without copying.
#[derive(Debug, Clone)]
pub struct Entries<'a, K> {
    slice: &'a [(K, f64)],
    skip: Option<K>,
}

impl<'a, K: Copy + Ord> Entries<'a, K> {
    pub fn new(slice: &'a [(K, f64)]) -> Self {
        Entries { slice, skip: None }
    }

    pub fn empty() -> Self {
        Entries { slice: &[], skip: None }
    }

    pub fn skipping(slice: &'a [(K, f64)], skip: K) -> Self {
        Entries { slice, skip: Some(skip) }
    }

    /// Whether iterating would yield `key`.
    pub fn contains(&self, key: K) -> bool {
        self.skip != Some(key) && self.slice.binary_search_by(|(k, _)| k.cmp(&key)).is_ok()
    }

    pub fn size(&self) -> usize {
        match self.skip {
            Some(s) if self.slice.binary_search_by(|(k, _)| k.cmp(&s)).is_ok() => self.slice.len() - 1,
            _ => self.slice.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }
}

impl<K: Copy + PartialEq> Iterator for Entries<'_, K> {
    type Item = (K, f64);

    fn next(&mut self) -> Option<(K, f64)> {
        while let Some((&head, rest)) = self.slice.split_first() {
            self.slice = rest;
            if Some(head.0) != self.skip {
                return Some(head);
            }
        }
        None
    }
}

/// Read access to ratings. Every algorithm reads ratings through this trait so
/// that evaluation can hide the held-out rating and audit what was read.
pub trait RatingView: Sync {
    fn scale(&self) -> &RatingScale;
    fn rating(&self, user: UserId, item: ItemId) -> Option<f64>;
    /// The user's ratings, sorted by item.
    fn user_ratings(&self, user: UserId) -> Entries<'_, ItemId>;
    /// The item's raters, sorted by user.
    fn item_raters(&self, item: ItemId) -> Entries<'_, UserId>;
}

/// Sparse user × item rating matrix with both row and column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    scale: RatingScale,
    by_user: HashMap<UserId, Vec<(ItemId, f64)>>,
    by_item: HashMap<ItemId, Vec<(UserId, f64)>>,
    len: usize,
}

impl RatingTable {
    pub fn builder(scale: RatingScale) -> RatingTableBuilder {
        RatingTableBuilder { scale, entries: BTreeMap::new() }
    }

    pub fn empty(scale: RatingScale) -> Self {
        Self::builder(scale).build()
    }

    /// Builds a table from triples; later duplicates replace earlier ones.
    pub fn from_triples(
        scale: RatingScale,
        triples: impl IntoIterator<Item = (UserId, ItemId, f64)>,
    ) -> Result<Self> {
        let mut b = Self::builder(scale);
        for (u, i, r) in triples {
            b.insert(u, i, r)?;
        }
        Ok(b.build())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_users(&self) -> usize {
        self.by_user.len()
    }

    pub fn num_items(&self) -> usize {
        self.by_item.len()
    }

    /// Users with at least one rating, ascending.
    pub fn users(&self) -> Vec<UserId> {
        let mut v: Vec<_> = self.by_user.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Items with at least one rating, ascending.
    pub fn items(&self) -> Vec<ItemId> {
        let mut v: Vec<_> = self.by_item.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn has_item(&self, item: ItemId) -> bool {
        self.by_item.contains_key(&item)
    }

    /// All ratings in (user, item) order.
    pub fn triples(&self) -> Vec<(UserId, ItemId, f64)> {
        let mut out = Vec::with_capacity(self.len);
        for u in self.users() {
            out.extend(self.by_user[&u].iter().map(|&(i, r)| (u, i, r)));
        }
        out
    }

    pub fn user_slice(&self, user: UserId) -> &[(ItemId, f64)] {
        self.by_user.get(&user).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn item_slice(&self, item: ItemId) -> &[(UserId, f64)] {
        self.by_item.get(&item).map(Vec::as_slice).unwrap_or(&[])
    }

    /// A copy of this table with one rating removed.
    pub fn without(&self, user: UserId, item: ItemId) -> RatingTable {
        let triples = self.triples().into_iter().filter(|&(u, i, _)| !(u == user && i == item));
        RatingTable::from_triples(self.scale, triples).expect("ratings were already validated")
    }
}

impl RatingView for RatingTable {
    fn scale(&self) -> &RatingScale {
        &self.scale
    }

    fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        let row = self.by_user.get(&user)?;
        row.binary_search_by(|(i, _)| i.cmp(&item)).ok().map(|idx| row[idx].1)
    }

    fn user_ratings(&self, user: UserId) -> Entries<'_, ItemId> {
        Entries::new(self.user_slice(user))
    }

    fn item_raters(&self, item: ItemId) -> Entries<'_, UserId> {
        Entries::new(self.item_slice(item))
    }
}

pub struct RatingTableBuilder {
    scale: RatingScale,
    entries: BTreeMap<(UserId, ItemId), f64>,
}

impl RatingTableBuilder {
    /// Inserts a rating and returns the value it replaced, if any.
    pub fn insert(&mut self, user: UserId, item: ItemId, rating: f64) -> Result<Option<f64>> {
        if !self.scale.contains(rating) {
            return Err(Error::domain(format!(
                "rating {rating} for ({user}, {item}) outside [{}, {}]",
                self.scale.min, self.scale.max
            )));
        }
        Ok(self.entries.insert((user, item), rating))
    }

    pub fn build(self) -> RatingTable {
        let mut by_user: HashMap<UserId, Vec<(ItemId, f64)>> = HashMap::new();
        let mut by_item: HashMap<ItemId, Vec<(UserId, f64)>> = HashMap::new();
        let len = self.entries.len();
        // BTreeMap order makes both index lists come out sorted.
        for ((u, i), r) in self.entries {
            by_user.entry(u).or_default().push((i, r));
            by_item.entry(i).or_default().push((u, r));
        }
        RatingTable { scale: self.scale, by_user, by_item, len }
    }
}

/// Binary friendship/trust adjacency over users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    adjacency: BTreeMap<UserId, Vec<UserId>>,
    directed: bool,
}

impl SocialGraph {
    pub fn new(directed: bool) -> Self {
        SocialGraph { adjacency: BTreeMap::new(), directed }
    }

    pub fn from_edges(directed: bool, edges: impl IntoIterator<Item = (UserId, UserId)>) -> Self {
        let mut g = SocialGraph::new(directed);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Adds `a → b` (and `b → a` when undirected). Returns `false` for a
    /// self-loop, which is not inserted.
    pub fn add_edge(&mut self, a: UserId, b: UserId) -> bool {
        if a == b {
            return false;
        }
        self.insert_arc(a, b);
        if self.directed {
            self.adjacency.entry(b).or_default();
        } else {
            self.insert_arc(b, a);
        }
        true
    }

    fn insert_arc(&mut self, a: UserId, b: UserId) {
        let row = self.adjacency.entry(a).or_default();
        if let Err(pos) = row.binary_search(&b) {
            row.insert(pos, b);
        }
    }

    /// Makes the adjacency symmetric and marks the graph undirected.
    pub fn symmetrize(&mut self) {
        let arcs: Vec<(UserId, UserId)> = self.arcs().collect();
        for (a, b) in arcs {
            self.insert_arc(b, a);
        }
        self.directed = false;
    }

    pub fn is_symmetric(&self) -> bool {
        self.arcs().all(|(a, b)| self.has_edge(b, a))
    }

    pub fn has_edge(&self, a: UserId, b: UserId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Sorted out-neighbors; empty for unknown users.
    pub fn neighbors(&self, user: UserId) -> &[UserId] {
        self.adjacency.get(&user).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, user: UserId) -> usize {
        self.neighbors(user).len()
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.adjacency.contains_key(&user)
    }

    /// Users that appear as an endpoint of some edge, ascending.
    pub fn nodes(&self) -> impl Iterator<Item = UserId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of stored arcs (an undirected edge counts twice).
    pub fn num_arcs(&self) -> usize {
        self.adjacency.values().map(Vec::len).sum()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (UserId, UserId)> + '_ {
        self.adjacency.iter().flat_map(|(&a, row)| row.iter().map(move |&b| (a, b)))
    }

    /// Size of the sorted intersection of two neighbor lists.
    pub fn mutual_count(&self, a: UserId, b: UserId) -> usize {
        sorted_intersection_len(self.neighbors(a), self.neighbors(b))
    }
}

pub(crate) fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub ratings: RatingTable,
    pub social: SocialGraph,
}

impl Dataset {
    pub fn new(name: impl Into<String>, ratings: RatingTable, social: SocialGraph) -> Self {
        Dataset { name: name.into(), ratings, social }
    }

    /// Every user that has a rating or a social link, ascending.
    pub fn users(&self) -> Vec<UserId> {
        let set: BTreeSet<UserId> = self.ratings.users().into_iter().chain(self.social.nodes()).collect();
        set.into_iter().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty() && self.social.num_nodes() == 0
    }

    pub fn sparsity(&self) -> Result<f64> {
        sparsity_from_counts(self.ratings.len(), self.users().len(), self.ratings.num_items())
    }
}

/// Percentage of the user × item grid without a rating.
pub fn sparsity(ratings: &RatingTable, num_users: usize, num_items: usize) -> Result<f64> {
    sparsity_from_counts(ratings.len(), num_users, num_items)
}

pub fn sparsity_from_counts(num_ratings: usize, num_users: usize, num_items: usize) -> Result<f64> {
    if num_users == 0 || num_items == 0 {
        return Err(Error::domain("sparsity needs at least one user and one item"));
    }
    let cells = num_users as f64 * num_items as f64;
    Ok((1.0 - num_ratings as f64 / cells) * 100.0)
}
