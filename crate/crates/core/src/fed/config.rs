use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::PanConfig;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Algorithm {
    FedAvg,
    /// Local proximal term with coefficient `mu`.
    FedProx {
        mu: f64,
    },
    /// Server-side SGD with momentum on the averaged pseudo-gradient.
    FedOpt {
        server_lr: f64,
        server_momentum: f64,
    },
}

/// Shuffle injection during local training: `expected_shuffles` (`N_sf`)
/// full-model shuffles per client run, each with disorder `p_sf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuffleInjection {
    pub expected_shuffles: f64,
    pub p_sf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// `K`.
    pub clients: usize,
    /// `R`, fraction of clients selected per round.
    pub participation: f64,
    /// `E`.
    pub local_epochs: usize,
    /// `H`.
    pub rounds: usize,
    /// `B`.
    pub batch_size: usize,
    /// Dirichlet concentration for the label-skew split.
    pub alpha: f64,
    pub local_lr: f64,
    pub momentum: f64,
    pub warmup_steps: usize,
    pub algorithm: Algorithm,
    pub pan: PanConfig,
    /// Hidden widths; input and output sizes come from the data.
    pub hidden: Vec<usize>,
    pub shuffle: Option<ShuffleInjection>,
    /// Weight the average by client sample counts instead of `1/|S_t|`.
    pub weighted_average: bool,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            clients: 10,
            participation: 1.0,
            local_epochs: 5,
            rounds: 10,
            batch_size: 32,
            alpha: 1.0,
            local_lr: 0.05,
            momentum: 0.9,
            warmup_steps: 0,
            algorithm: Algorithm::FedAvg,
            pan: PanConfig::off(),
            hidden: vec![32, 32],
            shuffle: None,
            weighted_average: false,
            seed: 0,
        }
    }
}

impl FederationConfig {
    /// `⌈R·K⌉`.
    pub fn clients_per_round(&self) -> usize {
        // guard against 0.1 * 100 = 10.000000000000002
        ((self.participation * self.clients as f64) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("clients must be >= 1"));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::config(format!(
                "participation must lie in (0, 1], got {}",
                self.participation
            )));
        }
        if self.clients_per_round() == 0 {
            return Err(Error::config("no clients selected per round"));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be > 0"));
        }
        if !(self.local_lr >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("need local_lr >= 0 and momentum in [0, 1)"));
        }
        match self.algorithm {
            Algorithm::FedProx { mu } if !(mu >= 0.0) => {
                return Err(Error::config("FedProx mu must be >= 0"))
            }
            Algorithm::FedOpt {
                server_lr,
                server_momentum,
            } if !(server_lr > 0.0) || !(0.0..1.0).contains(&server_momentum) => {
                return Err(Error::config(
                    "FedOpt needs server_lr > 0 and server_momentum in [0, 1)",
                ))
            }
            _ => {}
        }
        if let Some(s) = self.shuffle {
            if !(s.expected_shuffles >= 0.0) || !(0.0..=1.0).contains(&s.p_sf) {
                return Err(Error::config("shuffle needs N_sf >= 0 and P_sf in [0, 1]"));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be >= 1"));
        }
        self.pan.validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            lr: self.local_lr,
            momentum: self.momentum,
            prox_mu: match self.algorithm {
                Algorithm::FedProx { mu } => mu,
                _ => 0.0,
            },
            warmup_steps: self.warmup_steps,
        }
    }

    pub fn layer_sizes(&self, input_dim: usize, classes: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(classes);
        sizes
    }
}
