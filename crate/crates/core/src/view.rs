//! Rating views used by leave-one-out evaluation.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::data::{Entries, ItemId, RatingScale, RatingTable, RatingView, UserId};

/// A rating table with one (user, item) rating hidden.
#[derive(Debug, Clone, Copy)]
pub struct MaskedRatings<'a> {
    base: &'a RatingTable,
    user: UserId,
    item: ItemId,
}

impl<'a> MaskedRatings<'a> {
    pub fn new(base: &'a RatingTable, user: UserId, item: ItemId) -> Self {
        MaskedRatings { base, user, item }
    }

    pub fn hidden(&self) -> (UserId, ItemId) {
        (self.user, self.item)
    }
}

impl RatingView for MaskedRatings<'_> {
    fn scale(&self) -> &RatingScale {
        self.base.scale()
    }

    fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        if user == self.user && item == self.item {
            None
        } else {
            self.base.rating(user, item)
        }
    }

    fn user_ratings(&self, user: UserId) -> Entries<'_, ItemId> {
        if user == self.user {
            Entries::skipping(self.base.user_slice(user), self.item)
        } else {
            self.base.user_ratings(user)
        }
    }

    fn item_raters(&self, item: ItemId) -> Entries<'_, UserId> {
        if item == self.item {
            Entries::skipping(self.base.item_slice(item), self.user)
        } else {
            self.base.item_raters(item)
        }
    }
}

/// Wraps a view and counts every time it hands out a watched (user, item)
/// rating, either as a point lookup or inside a profile/rater list.
pub struct AuditedRatings<'a, V: RatingView + ?Sized> {
    inner: &'a V,
    watched: (UserId, ItemId),
    reads: AtomicUsize,
    violations: AtomicUsize,
}

impl<'a, V: RatingView + ?Sized> AuditedRatings<'a, V> {
    pub fn new(inner: &'a V, watched_user: UserId, watched_item: ItemId) -> Self {
        AuditedRatings {
            inner,
            watched: (watched_user, watched_item),
            reads: AtomicUsize::new(0),
            violations: AtomicUsize::new(0),
        }
    }

    pub fn violations(&self) -> usize {
        self.violations.load(Ordering::Relaxed)
    }

    /// Total number of accesses through this view.
    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    fn flag(&self, leaked: bool) {
        self.reads.fetch_add(1, Ordering::Relaxed);
        if leaked {
            self.violations.fetch_add(1, Ordering::Relaxed);
        }
    }
}

impl<V: RatingView + ?Sized> RatingView for AuditedRatings<'_, V> {
    fn scale(&self) -> &RatingScale {
        self.inner.scale()
    }

    fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        let r = self.inner.rating(user, item);
        self.flag((user, item) == self.watched && r.is_some());
        r
    }

    fn user_ratings(&self, user: UserId) -> Entries<'_, ItemId> {
        let e = self.inner.user_ratings(user);
        self.flag(user == self.watched.0 && e.contains(self.watched.1));
        e
    }

    fn item_raters(&self, item: ItemId) -> Entries<'_, UserId> {
        let e = self.inner.item_raters(item);
        self.flag(item == self.watched.1 && e.contains(self.watched.0));
        e
    }
}
