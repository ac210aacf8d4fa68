use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fedpan::data::gen_synthetic;
use fedpan::fed::{run_round, Federation, FederationConfig, RoundState};
use fedpan::permutation::{shuffle_error, simulate_injection_r_kept, PermutationPlan};
use fedpan::{Execution, Matrix, MlpModel, PanConfig, SeededRng};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn fed_round(c: &mut Criterion) {
    let data = gen_synthetic(3000, 20, 10, 3.0, 0).unwrap();
    let (train, test) = data.split(2500, 0).unwrap();
    let cfg = FederationConfig {
        clients: 8,
        local_epochs: 1,
        hidden: vec![64, 64],
        pan: PanConfig::multiplicative(0.1, 1.0),
        ..Default::default()
    };
    let fed = Federation::new(cfg, train, test).unwrap();
    let state = RoundState::new(fed.initial_model().unwrap());
    let mut group = c.benchmark_group("fed_round");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_round(black_box(&state), &fed, exec).unwrap())
        });
    }
    group.finish();
}

fn r_kept_monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("r_kept_monte_carlo");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                simulate_injection_r_kept(512, 50, 1.0, 0.1, 200, black_box(0), exec).unwrap()
            })
        });
    }
    group.finish();
}

fn shuffle_sweep(c: &mut Criterion) {
    let model = MlpModel::new(&[20, 64, 64, 64, 10], PanConfig::off(), 0).unwrap();
    let mut rng = SeededRng::new(1);
    let x = Matrix::from_vec(100, 20, rng.gaussian_vec(2000, 0.0, 1.0)).unwrap();
    let plans: Vec<_> = (0..32)
        .map(|_| PermutationPlan::for_model(&model, 0.5, &mut rng).unwrap())
        .collect();
    let amplitudes = [0.0, 0.01, 0.05, 0.1, 0.25];
    let mut group = c.benchmark_group("shuffle_sweep");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(amplitudes.len() * plans.len(), |i| {
                    let mut m = model.clone();
                    m.set_pan(PanConfig::multiplicative(amplitudes[i / plans.len()], 1.0))
                        .unwrap();
                    shuffle_error(&m, &plans[i % plans.len()], &x).unwrap().mean
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, fed_round, r_kept_monte_carlo, shuffle_sweep);
criterion_main!(benches);
