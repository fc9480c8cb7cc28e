//! Seeded synthetic datasets with community structure.
//!
//! Users are split into communities. Each community has its own item pool
//! and most ratings and friendships stay inside it, which keeps the trust
//! network's degree bounded (roughly the community size plus a few bridges)
//! no matter how many users are generated.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, ItemId, RatingScale, RatingTable, SocialGraph, UserId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub users: usize,
    pub community_size: usize,
    pub items_per_community: usize,
    pub ratings_per_user: usize,
    pub friends_per_user: usize,
    /// Probability that a user also befriends someone outside the community.
    pub bridge_probability: f64,
    /// Items outside every community, rated occasionally.
    pub global_items: usize,
    pub global_ratings_per_user: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            users: 5000,
            community_size: 10,
            items_per_community: 25,
            ratings_per_user: 8,
            friends_per_user: 2,
            bridge_probability: 0.1,
            global_items: 20_000,
            global_ratings_per_user: 1,
            noise: 0.6,
            seed: 7,
        }
    }
}

pub fn generate(config: &SyntheticConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = RatingScale::five_star();
    let community_size = config.community_size.max(2);
    let communities = config.users.div_ceil(community_size);

    let quality: Vec<f64> = (0..communities * config.items_per_community)
        .map(|_| rng.random_range(1.5..4.5))
        .collect();
    let global_quality: Vec<f64> = (0..config.global_items).map(|_| rng.random_range(1.0..5.0)).collect();

    let mut builder = RatingTable::builder(scale);
    let mut social = SocialGraph::new(false);
    let all_users: Vec<u32> = (0..config.users as u32).collect();

    for u in 0..config.users {
        let community = u / community_size;
        let bias: f64 = rng.random_range(-0.5..0.5);
        let pool: Vec<usize> = (0..config.items_per_community)
            .map(|k| community * config.items_per_community + k)
            .collect();
        let picks: Vec<usize> = pool
            .choose_multiple(&mut rng, config.ratings_per_user.min(pool.len()))
            .copied()
            .collect();
        for item in picks {
            let r = quality[item] + bias + rng.random_range(-config.noise..=config.noise);
            builder
                .insert(UserId(u as u32), ItemId(item as u32), scale.clamp(r.round()))
                .expect("clamped into scale");
        }
        if config.global_items > 0 {
            for _ in 0..config.global_ratings_per_user {
                let g = rng.random_range(0..config.global_items);
                let r = global_quality[g] + bias + rng.random_range(-config.noise..=config.noise);
                let id = (communities * config.items_per_community + g) as u32;
                builder.insert(UserId(u as u32), ItemId(id), scale.clamp(r.round())).expect("clamped");
            }
        }

        let lo = community * community_size;
        let hi = ((community + 1) * community_size).min(config.users);
        let mut mates: Vec<usize> = (lo..hi).filter(|&v| v != u).collect();
        mates.shuffle(&mut rng);
        for &v in mates.iter().take(config.friends_per_user) {
            social.add_edge(UserId(u as u32), UserId(v as u32));
        }
        if rng.random_bool(config.bridge_probability.clamp(0.0, 1.0)) {
            if let Some(&v) = all_users.choose(&mut rng) {
                social.add_edge(UserId(u as u32), UserId(v));
            }
        }
    }
    Dataset::new(format!("synthetic-{}", config.users), builder.build(), social)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_scale() {
        let cfg = SyntheticConfig { users: 200, ..SyntheticConfig::default() };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.ratings, b.ratings);
        assert_eq!(a.social, b.social);
        assert!(a.social.is_symmetric());
        assert_eq!(a.ratings.num_users(), 200);
        for (_, _, r) in a.ratings.triples() {
            assert!((1.0..=5.0).contains(&r));
        }
    }
}
