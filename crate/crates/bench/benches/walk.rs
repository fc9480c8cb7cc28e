use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trustwalk_core::evaluation::WalkerEngine;
use trustwalk_core::synthetic::{generate, SyntheticConfig};
use trustwalk_core::view::MaskedRatings;
use trustwalk_core::{centrality, walker, Dataset, NetworkConfig, Predictor, TrustNetwork, WalkConfig};

fn dataset(users: usize) -> Dataset {
    generate(&SyntheticConfig { users, ..SyntheticConfig::default() })
}

fn network_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("network_build");
    group.sample_size(10);
    for users in [500, 5000] {
        let data = dataset(users);
        group.bench_with_input(BenchmarkId::from_parameter(users), &data, |b, data| {
            b.iter(|| TrustNetwork::build(black_box(data), NetworkConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn impact_factors(c: &mut Criterion) {
    let data = dataset(5000);
    c.bench_function("impact_factors_5000", |b| b.iter(|| centrality::all_scores(black_box(&data.social))));
}

fn predict(c: &mut Criterion) {
    let data = dataset(5000);
    let net = TrustNetwork::build(&data, NetworkConfig::default()).unwrap();
    let (user, item, _) = data.ratings.triples()[1234];
    let masked = data.ratings.without(user, item);

    let mut group = c.benchmark_group("predict");
    for walks in [100, 1000] {
        let config = WalkConfig { num_walks: walks, convergence_epsilon: 0.0, ..WalkConfig::default() };
        group.bench_with_input(BenchmarkId::new("walks", walks), &config, |b, config| {
            b.iter(|| walker::predict(user, item, &net, &masked, config).unwrap())
        });
    }
    group.finish();

    let engine = WalkerEngine { network: &net, config: WalkConfig { convergence_epsilon: 0.0, ..WalkConfig::default() } };
    c.bench_function("loo_query_patched", |b| {
        b.iter(|| {
            let view = MaskedRatings::new(&data.ratings, user, item);
            engine.predict(user, item, &view, black_box(7)).unwrap()
        })
    });
}

criterion_group!(benches, network_build, impact_factors, predict);
criterion_main!(benches);
