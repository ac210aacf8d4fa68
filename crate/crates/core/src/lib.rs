//! Federated-learning simulator with position-aware neurons.
//!
//! Hidden neurons can be fused (additively or multiplicatively) with a fixed
//! sinusoidal position encoding. With the encoding switched on, permuting
//! hidden neurons changes the network output, which ties neurons to their
//! coordinates and keeps client models aligned for coordinate-wise
//! averaging.
//!
//! Module map:
//!
//! * [`linalg`], [`rng`], [`exec`]: dense algebra, seeded streams,
//!   parallel/sequential execution.
//! * [`network`]: the MLP, encodings, backprop, SGD, checkpoints.
//! * [`permutation`]: permutation plans, shuffling, shuffle error, `R_kept`,
//!   shuffle injection during training.
//! * [`data`]: synthetic blobs, IDX ingestion, Dirichlet partitioning,
//!   batching.
//! * [`train`]: the local training loop shared by clients and centralized
//!   runs.
//! * [`fed`]: rounds, aggregation, server optimizer, divergence, metrics.
//! * [`alignment`]: activation matching, preference vectors, fusion curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod alignment;
pub mod data;
mod error;
pub mod exec;
pub mod fed;
pub mod linalg;
pub mod network;
pub mod permutation;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{Matrix, Vector};
pub use network::{MlpModel, PanConfig, PanMode};
pub use rng::SeededRng;
