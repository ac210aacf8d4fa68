use serde::Serialize;

use super::config::{Algorithm, FederationConfig};
use crate::data::{partition_dirichlet, ClientDataset, Dataset, PartitionSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::MlpModel;
use crate::permutation::{shuffle_injection_schedule, ShuffleInjector};
use crate::rng::{stream_seed, tags, SeededRng};
use crate::train::{evaluate, train_local, TrainStats};

/// Training data, its client split and the held-out test set.
#[derive(Clone, Debug)]
pub struct Federation {
    pub config: FederationConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub clients: Vec<ClientDataset>,
}

impl Federation {
    /// Splits `train` across clients with the configured Dirichlet alpha.
    pub fn new(config: FederationConfig, train: Dataset, test: Dataset) -> Result<Self> {
        config.validate()?;
        let spec = PartitionSpec {
            clients: config.clients,
            alpha: config.alpha,
            seed: stream_seed(config.seed, tags::PARTITION, 0),
        };
        let clients = partition_dirichlet(&train, &spec)?;
        Self::with_clients(config, train, test, clients)
    }

    /// Uses an explicit client split.
    pub fn with_clients(
        config: FederationConfig,
        train: Dataset,
        test: Dataset,
        clients: Vec<ClientDataset>,
    ) -> Result<Self> {
        config.validate()?;
        if clients.len() != config.clients {
            return Err(Error::config(format!(
                "{} client datasets for K = {}",
                clients.len(),
                config.clients
            )));
        }
        if train.dim() != test.dim() || train.classes() != test.classes() {
            return Err(Error::shape("train and test sets disagree on shape"));
        }
        Ok(Self {
            config,
            train,
            test,
            clients,
        })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.config
            .layer_sizes(self.train.dim(), self.train.classes())
    }

    /// The round-0 global model.
    pub fn initial_model(&self) -> Result<MlpModel> {
        MlpModel::new(
            &self.layer_sizes(),
            self.config.pan,
            stream_seed(self.config.seed, tags::INIT, 0),
        )
    }
}

/// Server-side state carried between rounds.
#[derive(Clone, Debug)]
pub struct RoundState {
    pub round: usize,
    pub global: MlpModel,
    server_velocity: Option<Vec<f64>>,
}

impl RoundState {
    pub fn new(global: MlpModel) -> Self {
        Self {
            round: 0,
            global,
            server_velocity: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub selected: Vec<usize>,
    /// Test accuracy of the aggregated model.
    pub accuracy: f64,
    /// Weight divergence per layer `1..=L` among the uploaded models.
    pub divergence: Vec<f64>,
    /// Mean parameter distance of uploaded models to the round's start model.
    pub client_drift: f64,
    pub mean_train_loss: f64,
    /// Injected shuffles per selected client.
    pub shuffles: Vec<usize>,
    /// Mean `R_kept` of the accumulated per-client permutations.
    pub r_kept: f64,
}

/// Result of one client's local update.
#[derive(Clone, Debug)]
pub struct ClientUpdate {
    pub client: usize,
    pub model: MlpModel,
    pub samples: usize,
    pub stats: TrainStats,
    pub r_kept: f64,
}

/// Clients selected in round `t`, ascending.
pub fn select_clients(cfg: &FederationConfig, round: usize) -> Vec<usize> {
    let mut rng = SeededRng::derive(cfg.seed, tags::ROUND, round as u64);
    rng.choose_distinct(cfg.clients, cfg.clients_per_round())
}

/// Local update of client `k` starting from `global`.
pub fn client_update(
    fed: &Federation,
    global: &MlpModel,
    round: usize,
    client: usize,
) -> Result<ClientUpdate> {
    let cfg = &fed.config;
    let data = &fed.clients[client];
    let train_cfg = cfg.train_config();
    let client_seed = stream_seed(
        stream_seed(cfg.seed, tags::ROUND, round as u64),
        tags::CLIENT,
        client as u64,
    );
    let mut rng = SeededRng::new(client_seed);
    let mut model = global.clone();
    let mut injector = match cfg.shuffle {
        Some(s) if train_cfg.epochs > 0 => {
            let schedule = shuffle_injection_schedule(
                train_cfg.epochs,
                data.len(),
                train_cfg.batch_size,
                s.expected_shuffles,
                s.p_sf,
            )?;
            Some(ShuffleInjector::new(
                schedule,
                model.hidden_sizes(),
                SeededRng::derive(client_seed, tags::SHUFFLE, 0),
            ))
        }
        _ => None,
    };
    let anchor = matches!(cfg.algorithm, Algorithm::FedProx { .. }).then_some(global);
    let stats = train_local(
        &mut model,
        &fed.train,
        &data.indices,
        &train_cfg,
        anchor,
        injector.as_mut(),
        &mut rng,
    )?;
    Ok(ClientUpdate {
        client,
        model,
        samples: data.len(),
        stats,
        r_kept: injector.map_or(1.0, |i| i.r_kept()),
    })
}

/// Coordinate-wise average `Σ w_k θ_k`, summed in the given order. Without
/// weights every model counts `1/n`.
pub fn average_models(models: &[&MlpModel], weights: Option<&[f64]>) -> Result<MlpModel> {
    let first = *models
        .first()
        .ok_or_else(|| Error::config("nothing to average"))?;
    let uniform = vec![1.0 / models.len() as f64; models.len()];
    let weights = weights.unwrap_or(&uniform);
    if weights.len() != models.len() {
        return Err(Error::config("one weight per model required"));
    }
    let mut acc = vec![0.0; first.num_params()];
    for (m, &w) in models.iter().zip(weights) {
        first.check_same_architecture(m)?;
        for (a, p) in acc.iter_mut().zip(m.flat_params()) {
            *a += w * p;
        }
    }
    let mut out = first.clone();
    out.set_flat_params(&acc)?;
    Ok(out)
}

/// Mean Frobenius distance of the clients' `W_l` (1-based `layer`) to their
/// coordinate-wise mean.
pub fn weight_divergence(models: &[&MlpModel], layer: usize) -> Result<f64> {
    if models.len() < 2 {
        return Err(Error::config("divergence needs at least two models"));
    }
    let first = models[0];
    if layer == 0 || layer > first.depth() {
        return Err(Error::Index(format!(
            "layer {layer} outside 1..={}",
            first.depth()
        )));
    }
    for m in models {
        first.check_same_architecture(m)?;
    }
    let weights: Vec<&[f64]> = models
        .iter()
        .map(|m| m.layers()[layer - 1].weight.data())
        .collect();
    let n = models.len() as f64;
    let mean: Vec<f64> = (0..weights[0].len())
        .map(|i| weights.iter().map(|w| w[i]).sum::<f64>() / n)
        .collect();
    let total: f64 = weights
        .iter()
        .map(|w| {
            w.iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / n)
}

/// One communication round: select, train locally (concurrently under
/// `exec`), aggregate in client-id order, evaluate.
pub fn run_round(
    state: &RoundState,
    fed: &Federation,
    exec: Execution,
) -> Result<(RoundState, RoundMetrics)> {
    let cfg = &fed.config;
    let selected = select_clients(cfg, state.round);
    if selected.is_empty() {
        return Err(Error::config("no clients selected"));
    }
    let updates = exec.try_map(selected.len(), |i| {
        client_update(fed, &state.global, state.round, selected[i])
    })?;

    let models: Vec<&MlpModel> = updates.iter().map(|u| &u.model).collect();
    let weights: Option<Vec<f64>> = cfg.weighted_average.then(|| {
        let total: usize = updates.iter().map(|u| u.samples).sum();
        updates
            .iter()
            .map(|u| u.samples as f64 / total as f64)
            .collect()
    });
    let average = average_models(&models, weights.as_deref())?;

    let mut server_velocity = state.server_velocity.clone();
    let global = match cfg.algorithm {
        Algorithm::FedAvg | Algorithm::FedProx { .. } => average,
        Algorithm::FedOpt {
            server_lr,
            server_momentum,
        } => {
            let theta = state.global.flat_params();
            let avg = average.flat_params();
            let v = server_velocity.get_or_insert_with(|| vec![0.0; theta.len()]);
            let mut next = theta.clone();
            for i in 0..theta.len() {
                let pseudo_grad = theta[i] - avg[i];
                v[i] = server_momentum * v[i] + pseudo_grad;
                next[i] = theta[i] - server_lr * v[i];
            }
            let mut m = state.global.clone();
            m.set_flat_params(&next)?;
            m
        }
    };
    if !global.is_finite() {
        return Err(Error::NonFinite(format!(
            "global model diverged in round {}",
            state.round
        )));
    }

    let divergence = if models.len() >= 2 {
        (1..=global.depth())
            .map(|l| weight_divergence(&models, l))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![0.0; global.depth()]
    };
    let client_drift = models
        .iter()
        .map(|m| m.param_distance(&state.global))
        .sum::<Result<f64>>()?
        / models.len() as f64;
    let metrics = RoundMetrics {
        round: state.round,
        accuracy: evaluate(&global, &fed.test)?,
        divergence,
        client_drift,
        mean_train_loss: updates.iter().map(|u| u.stats.mean_loss).sum::<f64>()
            / updates.len() as f64,
        shuffles: updates.iter().map(|u| u.stats.shuffles).collect(),
        r_kept: updates.iter().map(|u| u.r_kept).sum::<f64>() / updates.len() as f64,
        selected,
    };
    Ok((
        RoundState {
            round: state.round + 1,
            global,
            server_velocity,
        },
        metrics,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsLog {
    pub rounds: Vec<RoundMetrics>,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    #[serde(skip)]
    pub final_model: Option<MlpModel>,
}

impl MetricsLog {
    /// Mean over rounds of the per-round mean layer divergence.
    pub fn mean_divergence(&self) -> f64 {
        let per_round: Vec<f64> = self
            .rounds
            .iter()
            .map(|r| r.divergence.iter().sum::<f64>() / r.divergence.len().max(1) as f64)
            .collect();
        per_round.iter().sum::<f64>() / per_round.len().max(1) as f64
    }

    pub fn total_shuffles(&self) -> usize {
        self.rounds.iter().flat_map(|r| &r.shuffles).sum()
    }
}

/// Runs `H` rounds from the seeded initial model.
pub fn run_experiment(fed: &Federation, exec: Execution) -> Result<MetricsLog> {
    let init = fed.initial_model()?;
    let initial_accuracy = evaluate(&init, &fed.test)?;
    let mut state = RoundState::new(init);
    let mut rounds = Vec::with_capacity(fed.config.rounds);
    for _ in 0..fed.config.rounds {
        let (next, metrics) = run_round(&state, fed, exec)?;
        rounds.push(metrics);
        state = next;
    }
    let final_accuracy = rounds.last().map_or(initial_accuracy, |r| r.accuracy);
    let best_accuracy = rounds
        .iter()
        .map(|r| r.accuracy)
        .fold(initial_accuracy, f64::max);
    Ok(MetricsLog {
        rounds,
        initial_accuracy,
        final_accuracy,
        best_accuracy,
        final_model: Some(state.global),
    })
}
