// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dp_select_core::analysis::{noisy_max_pmf, pf_pmf};
use dp_select_core::mechanisms::{Mechanism, ScoreContext, Selector};
use dp_select_core::noise::{CalibratedNoise, NoiseKind, PrivacyBudget};
use dp_select_core::percentile::{PercentileModel, SmoothRule};
use dp_select_core::rng::seeded;
use dp_select_core::sensitivity::{
    smooth_sensitivity_bruteforce, Database, SmoothSensitivity, ENUMERATION_LIMIT,
};
use dp_select_core::trees::{build_random_forest, synthetic_tabular, ForestConfig, LeafLabelling};

fn scores(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 37) % 101) as f64 / 10.0).collect()
}

fn selection(c: &mut Criterion) {
    let mut g = c.benchmark_group("select");
    let budget = PrivacyBudget::new(1.0, 0.01).unwrap();
    for m in Mechanism::all(3, 1.0) {
        let sel = Selector::new(m, budget).unwrap();
        let ctx = ScoreContext {
            delta_u: 1.0,
            monotonic: false,
            smooth: sel.beta().map(|b| SmoothSensitivity::step(2, b)),
        };
        let u = scores(100);
        let mut rng = seeded(1);
        g.bench_function(m.label(), |b| {
            b.iter(|| sel.select(black_box(&u), &ctx, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("pmf");
    for n in [8usize, 64, 512] {
        let u = scores(n);
        g.bench_with_input(BenchmarkId::new("pf", n), &u, |b, u| {
            b.iter(|| pf_pmf(u, 1.0, 1.0).unwrap())
        });
        for kind in [NoiseKind::Laplace, NoiseKind::StudentT { dof: 3 }] {
            let noise = CalibratedNoise::standard(kind);
            g.bench_with_input(
                BenchmarkId::new(format!("noisy_max/{}", kind.name()), n),
                &u,
                |b, u| b.iter(|| noisy_max_pmf(u, &noise, 2.0).unwrap()),
            );
        }
    }
    g.finish();
}

fn sensitivity(c: &mut Criterion) {
    let model = PercentileModel::brute_force((0..4).map(f64::from).collect(), 50);
    let db = Database::from_counts(vec![1, 2, 1, 1]);
    c.bench_function("smooth_bruteforce/percentile", |b| {
        b.iter(|| {
            smooth_sensitivity_bruteforce(&model, black_box(&db), 0.3, ENUMERATION_LIMIT).unwrap()
        })
    });
}

fn forest(c: &mut Criterion) {
    let data = synthetic_tabular(4000, 0.05, &mut seeded(2));
    let cfg = ForestConfig {
        trees: 32,
        depth: 4,
        budget: PrivacyBudget::new(1.0, 0.01).unwrap(),
        labelling: LeafLabelling::Private {
            mechanism: Mechanism::SNM_LAP,
            rule: SmoothRule::Published,
        },
    };
    c.bench_function("forest/build", |b| {
        b.iter(|| build_random_forest(&data, &cfg, 3).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = selection, oracles, sensitivity, forest
}
criterion_main!(benches);
