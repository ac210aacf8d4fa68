use fedpan::data::{gen_synthetic, ClientDataset};
use fedpan::fed::{
    average_models, client_update, run_experiment, run_round, weight_divergence, Algorithm,
    Federation, FederationConfig, RoundState, ShuffleInjection,
};
use fedpan::linalg::{Matrix, Vector};
use fedpan::network::{Layer, MlpModel, PanConfig};
use fedpan::permutation::{shuffle_model, PermutationPlan};
use fedpan::{Execution, SeededRng};

fn federation(cfg: FederationConfig) -> Federation {
    let data = gen_synthetic(600, 6, 3, 3.0, 11).unwrap();
    let (train, test) = data.split(400, 1).unwrap();
    Federation::new(cfg, train, test).unwrap()
}

fn small(cfg: FederationConfig) -> FederationConfig {
    FederationConfig {
        clients: 4,
        local_epochs: 1,
        rounds: 3,
        hidden: vec![8, 8],
        ..cfg
    }
}

fn scalar(w: f64) -> MlpModel {
    let layer = Layer {
        weight: Matrix::from_rows(&[vec![w]]).unwrap(),
        bias: Vector::zeros(1),
    };
    MlpModel::from_layers(vec![layer], PanConfig::off(), 0).unwrap()
}

#[test]
fn single_client_round_returns_its_model() {
    let fed = federation(FederationConfig {
        clients: 1,
        ..small(Default::default())
    });
    let global = fed.initial_model().unwrap();
    let (next, metrics) = run_round(
        &RoundState::new(global.clone()),
        &fed,
        Execution::Sequential,
    )
    .unwrap();
    let local = client_update(&fed, &global, 0, 0).unwrap();
    assert_eq!(next.global, local.model);
    assert_eq!(metrics.selected, vec![0]);
    assert_ne!(next.global, global);
}

#[test]
fn zero_epochs_is_a_fixed_point() {
    let fed = federation(FederationConfig {
        clients: 2,
        local_epochs: 0,
        hidden: vec![5],
        ..Default::default()
    });
    let global = fed.initial_model().unwrap();
    let (next, _) = run_round(&RoundState::new(global.clone()), &fed, Execution::Parallel).unwrap();
    assert_eq!(next.global, global);
}

#[test]
fn averaging_arithmetic() {
    let (a, b) = (scalar(2.0), scalar(4.0));
    let avg = average_models(&[&a, &b], None).unwrap();
    assert_eq!(avg.layers()[0].weight[(0, 0)], 3.0);
    let weighted = average_models(&[&a, &b], Some(&[0.25, 0.75])).unwrap();
    assert_eq!(weighted.layers()[0].weight[(0, 0)], 3.5);
    assert!(average_models(&[], None).is_err());
    let other = MlpModel::new(&[1, 2], PanConfig::off(), 0).unwrap();
    assert!(average_models(&[&a, &other], None).is_err());
}

#[test]
fn divergence_examples() {
    let (a, b) = (scalar(1.0), scalar(3.0));
    assert_eq!(weight_divergence(&[&a, &b], 1).unwrap(), 1.0);
    assert_eq!(weight_divergence(&[&a, &a.clone()], 1).unwrap(), 0.0);
    assert!(weight_divergence(&[&a], 1).is_err());
    assert!(weight_divergence(&[&a, &b], 2).is_err());

    let mut rng = SeededRng::new(0);
    let models: Vec<MlpModel> = (0..3)
        .map(|s| MlpModel::new(&[4, 6, 3], PanConfig::off(), s).unwrap())
        .collect();
    let shift = Matrix::from_vec(6, 4, rng.gaussian_vec(24, 0.0, 5.0)).unwrap();
    let moved: Vec<MlpModel> = models
        .iter()
        .map(|m| {
            let mut m = m.clone();
            m.layers_mut()[0].weight.axpy(1.0, &shift).unwrap();
            m
        })
        .collect();
    let refs: Vec<&MlpModel> = models.iter().collect();
    let moved_refs: Vec<&MlpModel> = moved.iter().collect();
    let d0 = weight_divergence(&refs, 1).unwrap();
    let d1 = weight_divergence(&moved_refs, 1).unwrap();
    assert!((d0 - d1).abs() < 1e-12);
}

#[test]
fn averaging_commutes_with_permutation() {
    let models: Vec<MlpModel> = (0..4)
        .map(|s| MlpModel::new(&[5, 7, 6, 3], PanConfig::off(), s).unwrap())
        .collect();
    let plan = PermutationPlan::for_model(&models[0], 0.7, &mut SeededRng::new(9)).unwrap();
    let refs: Vec<&MlpModel> = models.iter().collect();
    let avg_then = shuffle_model(&average_models(&refs, None).unwrap(), &plan).unwrap();
    let shuffled: Vec<MlpModel> = models
        .iter()
        .map(|m| shuffle_model(m, &plan).unwrap())
        .collect();
    let srefs: Vec<&MlpModel> = shuffled.iter().collect();
    let then_avg = average_models(&srefs, None).unwrap();
    let diff = avg_then.param_distance(&then_avg).unwrap();
    assert!(diff < 1e-12);
}

#[test]
fn clients_share_encodings() {
    let fed = federation(small(FederationConfig {
        pan: PanConfig::multiplicative(0.1, 1.0),
        ..Default::default()
    }));
    let global = fed.initial_model().unwrap();
    for k in 0..fed.config.clients {
        let update = client_update(&fed, &global, 0, k).unwrap();
        assert_eq!(update.model.encodings(), global.encodings());
    }
}

#[test]
fn proximal_term_limits_drift() {
    let mut drifts = Vec::new();
    for mu in [1e-4, 1e-3, 1e-1] {
        let per_seed: Vec<f64> = (0..3u64)
            .map(|seed| {
                let fed = federation(small(FederationConfig {
                    alpha: 0.5,
                    local_epochs: 3,
                    rounds: 2,
                    algorithm: Algorithm::FedProx { mu },
                    seed,
                    ..Default::default()
                }));
                let log = run_experiment(&fed, Execution::Parallel).unwrap();
                log.rounds.last().unwrap().client_drift
            })
            .collect();
        let mut sorted = per_seed.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        drifts.push(sorted[1]);
    }
    assert!(drifts.windows(2).all(|w| w[0] > w[1]), "{drifts:?}");
}

#[test]
fn runs_are_deterministic_and_order_free() {
    let cfg = small(FederationConfig {
        participation: 0.5,
        pan: PanConfig::additive(0.05, 2.0),
        shuffle: Some(ShuffleInjection {
            expected_shuffles: 1.0,
            p_sf: 0.1,
        }),
        seed: 42,
        ..Default::default()
    });
    let fed = federation(cfg);
    let a = run_experiment(&fed, Execution::Parallel).unwrap();
    let b = run_experiment(&fed, Execution::Parallel).unwrap();
    let c = run_experiment(&fed, Execution::Sequential).unwrap();
    assert_eq!(a.rounds, b.rounds);
    assert_eq!(a.rounds, c.rounds);
    assert_eq!(a.final_model, c.final_model);
    assert!(a.rounds.iter().all(|r| r.selected.len() == 2));
}

#[test]
fn server_sgd_with_unit_rate_is_fedavg() {
    let base = small(FederationConfig {
        seed: 3,
        ..Default::default()
    });
    let avg = run_experiment(&federation(base.clone()), Execution::Sequential).unwrap();
    let opt = run_experiment(
        &federation(FederationConfig {
            algorithm: Algorithm::FedOpt {
                server_lr: 1.0,
                server_momentum: 0.0,
            },
            ..base
        }),
        Execution::Sequential,
    )
    .unwrap();
    let d = avg
        .final_model
        .unwrap()
        .param_distance(opt.final_model.as_ref().unwrap())
        .unwrap();
    assert!(d < 1e-9);
}

#[test]
fn server_momentum_changes_the_trajectory() {
    let base = small(FederationConfig {
        seed: 3,
        ..Default::default()
    });
    let plain = run_experiment(&federation(base.clone()), Execution::Sequential).unwrap();
    let heavy = run_experiment(
        &federation(FederationConfig {
            algorithm: Algorithm::FedOpt {
                server_lr: 0.5,
                server_momentum: 0.9,
            },
            ..base
        }),
        Execution::Sequential,
    )
    .unwrap();
    assert_ne!(plain.final_model, heavy.final_model);
    assert!(heavy.final_accuracy > 1.0 / 3.0);
}

#[test]
fn explicit_split_is_checked() {
    let data = gen_synthetic(100, 3, 2, 3.0, 0).unwrap();
    let (train, test) = data.split(80, 0).unwrap();
    let cfg = FederationConfig {
        clients: 2,
        ..Default::default()
    };
    let one = vec![ClientDataset {
        id: 0,
        indices: (0..80).collect(),
    }];
    assert!(Federation::with_clients(cfg.clone(), train.clone(), test.clone(), one).is_err());
    let two = vec![
        ClientDataset {
            id: 0,
            indices: (0..40).collect(),
        },
        ClientDataset {
            id: 1,
            indices: (40..80).collect(),
        },
    ];
    let fed = Federation::with_clients(cfg, train, test, two).unwrap();
    assert_eq!(fed.layer_sizes(), vec![3, 32, 32, 2]);
}

#[test]
fn injection_is_logged() {
    let fed = federation(small(FederationConfig {
        shuffle: Some(ShuffleInjection {
            expected_shuffles: 3.0,
            p_sf: 0.3,
        }),
        ..Default::default()
    }));
    let log = run_experiment(&fed, Execution::Parallel).unwrap();
    assert!(log.total_shuffles() > 0);
    assert!(log.rounds.iter().any(|r| r.r_kept < 1.0));
    let none = federation(small(FederationConfig::default()));
    let log = run_experiment(&none, Execution::Parallel).unwrap();
    assert_eq!(log.total_shuffles(), 0);
    assert!(log.rounds.iter().all(|r| r.r_kept == 1.0));
}
