use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vagt_core::estimator::{build_layers, Strategy};
use vagt_core::models::{model_random_2q, model_spin_chain};
use vagt_core::vagt::ansatz_for;
use vagt_core::{oracle, run, PauliSum, VagtConfig};

fn row(n: usize) -> Vec<f64> {
    (0..n).map(|k| (0.37 * k as f64).sin()).collect()
}

fn pauli(c: &mut Criterion) {
    let pair = model_spin_chain(6, 4.5, 1.0).unwrap();
    let h = pair.h_lambda();
    let m = pair.v.clone();
    c.bench_function("commutator spin chain n=6", |b| b.iter(|| black_box(&h).commutator(black_box(&m)).unwrap()));
    c.bench_function("to_dense + decompose n=6", |b| b.iter(|| PauliSum::decompose(&black_box(&h).to_dense()).unwrap()));
}

fn estimators(c: &mut Criterion) {
    let pair = model_random_2q(0, 1.0);
    let spec = ansatz_for(&pair, "universal2q15").unwrap();
    let r = row(spec.n_params());
    let mut g = c.benchmark_group("layer system random_2q");
    for (name, s) in [
        ("analytic", Strategy::Analytic),
        ("circuit-exact", Strategy::CircuitExact),
        ("circuit-shots 100", Strategy::CircuitShots { shots: 100, seed: 0 }),
        ("cheap-n2 exact", Strategy::CheapN2 { shots: None, seed: 0, direct: false }),
        ("cheap-n2 100", Strategy::CheapN2 { shots: Some(100), seed: 0, direct: false }),
    ] {
        g.bench_function(name, |b| b.iter(|| build_layers(&pair, &spec, black_box(&r), 0.5, 0, &s).unwrap()));
    }
    g.finish();
}

fn flows(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow");
    g.sample_size(10);
    let pair = model_random_2q(0, 1.0);
    let spec = ansatz_for(&pair, "universal2q15").unwrap();
    g.bench_function("random_2q T=10 analytic", |b| b.iter(|| run(&pair, &spec, &VagtConfig::new(10, Strategy::Analytic)).unwrap()));
    let chain = model_spin_chain(4, 4.5, 1.0).unwrap();
    let spec = ansatz_for(&chain, "spinchain140").unwrap();
    let mut cfg = VagtConfig::new(10, Strategy::Analytic);
    cfg.cutoff = 1e-7;
    g.bench_function("spin chain n=4 T=10 analytic", |b| b.iter(|| run(&chain, &spec, &cfg).unwrap()));
    g.finish();
}

fn dense(c: &mut Criterion) {
    let h = model_spin_chain(8, 4.5, 1.0).unwrap().h_lambda().to_dense();
    c.bench_function("oracle eigenvalues 256x256", |b| b.iter(|| oracle::eigenvalues(black_box(&h)).unwrap()));
}

criterion_group!(benches, pauli, estimators, flows, dense);
criterion_main!(benches);
