//! Federated training: client selection, local updates, coordinate-wise
//! aggregation and round metrics.
//!
//! Determinism: each client's stream is derived from `(seed, round, client)`
//! and aggregation sums in ascending client id, so results do not depend on
//! which worker finishes first.

mod config;
mod sim;

pub use crate::train::evaluate;
pub use config::{Algorithm, FederationConfig, ShuffleInjection};
pub use sim::{
    average_models, client_update, run_experiment, run_round, select_clients, weight_divergence,
    ClientUpdate, Federation, MetricsLog, RoundMetrics, RoundState,
};
