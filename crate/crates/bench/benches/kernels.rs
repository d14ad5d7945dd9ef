use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hypersat_core::hypergraph::{build_literal_hypergraph, normalized_operator};
use hypersat_core::model::{init_params, loss_and_gradients, DropoutState, Network};
use hypersat_core::objective::{ClauseTable, DEFAULT_LAMBDA};
use hypersat_core::oracle::local_search;
use hypersat_core::solver::train;
use hypersat_core::wcnf::{assign_random_weights, generate_random_3sat};
use hypersat_core::{SolveConfig, WcnfInstance};

const SIZES: [(usize, usize); 3] = [(100, 430), (200, 860), (250, 1065)];

fn instance(n: usize, m: usize) -> WcnfInstance {
    assign_random_weights(&generate_random_3sat(n, m, 1).unwrap(), 1, 1, 10).unwrap()
}

fn operator(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    for (n, m) in SIZES {
        let inst = instance(n, m);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| normalized_operator(&build_literal_hypergraph(black_box(inst))))
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let mut group = c.benchmark_group("network");
    for (n, m) in SIZES {
        let inst = instance(n, m);
        let config = SolveConfig::default().model_config(n);
        let net = Network::new(&build_literal_hypergraph(&inst), config).unwrap();
        let params = init_params(&config).unwrap();
        let table = Arc::new(ClauseTable::new(&inst));
        group.bench_function(BenchmarkId::new("forward", n), |b| {
            b.iter(|| {
                net.forward(black_box(&params), &DropoutState::inference())
                    .unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("loss_and_gradients", n), |b| {
            b.iter(|| loss_and_gradients(&net, &table, black_box(&params), DEFAULT_LAMBDA).unwrap())
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_10_epochs");
    group.sample_size(10);
    let config = SolveConfig {
        max_epochs: 10,
        ..SolveConfig::default()
    };
    for (n, m) in SIZES {
        let inst = instance(n, m);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| train(inst, &config).unwrap())
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_search_10k");
    for (n, m) in SIZES {
        let inst = instance(n, m);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| local_search(inst, 10_000, 3).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, operator, network, training, search);
criterion_main!(benches);
