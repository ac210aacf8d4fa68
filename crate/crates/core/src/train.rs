//! Local mini-batch training, shared by federated clients and centralized
//! runs.

use serde::{Deserialize, Serialize};

use crate::data::{epoch_batches, Dataset};
use crate::error::{Error, Result};
use crate::network::{
    argmax_rows, backward, forward, predict_scores, sgd_step, softmax_cross_entropy, MlpModel,
    OptimState,
};
use crate::permutation::ShuffleInjector;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Proximal coefficient; 0 disables the term.
    pub prox_mu: f64,
    pub warmup_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            prox_mu: 0.0,
            warmup_steps: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TrainStats {
    pub steps: usize,
    pub mean_loss: f64,
    pub shuffles: usize,
}

/// Trains `model` in place on the rows `indices` of `data`.
///
/// The optimizer state is fresh for every call. When `anchor` is given and
/// `prox_mu > 0` the proximal term pulls toward it. The injector, if any,
/// gets one draw after every optimizer step.
pub fn train_local(
    model: &mut MlpModel,
    data: &Dataset,
    indices: &[usize],
    cfg: &TrainConfig,
    anchor: Option<&MlpModel>,
    injector: Option<&mut ShuffleInjector>,
    rng: &mut SeededRng,
) -> Result<TrainStats> {
    train_with_callback(
        model,
        data,
        indices,
        cfg,
        anchor,
        injector,
        rng,
        |_, _, _| Ok(()),
    )
}

/// [`train_local`] that calls `on_epoch(epoch, model, mean_epoch_loss)`
/// after every epoch (1-based) with the optimizer state kept across epochs.
#[allow(clippy::too_many_arguments)]
pub fn train_with_callback(
    model: &mut MlpModel,
    data: &Dataset,
    indices: &[usize],
    cfg: &TrainConfig,
    anchor: Option<&MlpModel>,
    mut injector: Option<&mut ShuffleInjector>,
    rng: &mut SeededRng,
    mut on_epoch: impl FnMut(usize, &MlpModel, f64) -> Result<()>,
) -> Result<TrainStats> {
    if cfg.batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    let mut opt = OptimState::sgd(cfg.lr, cfg.momentum).with_warmup(cfg.warmup_steps);
    if let Some(anchor) = anchor {
        if cfg.prox_mu > 0.0 {
            opt = opt.with_proximal(cfg.prox_mu, anchor);
        }
    }
    let mut stats = TrainStats::default();
    let mut loss_sum = 0.0;
    for epoch in 1..=cfg.epochs {
        let (mut epoch_loss, mut epoch_steps) = (0.0, 0usize);
        for batch in epoch_batches(indices, cfg.batch_size, rng) {
            let (x, y) = data.gather(&batch);
            let acts = forward(model, &x)?;
            let (loss, grad) = softmax_cross_entropy(acts.output(), &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss became {loss} at step {}",
                    stats.steps
                )));
            }
            let grads = backward(model, &acts, &grad)?;
            sgd_step(model, &grads, &mut opt)?;
            loss_sum += loss;
            stats.steps += 1;
            epoch_loss += loss;
            epoch_steps += 1;
            if let Some(inj) = injector.as_deref_mut() {
                inj.step(model, Some(&mut opt))?;
            }
        }
        on_epoch(epoch, model, epoch_loss / epoch_steps.max(1) as f64)?;
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("parameters diverged".into()));
    }
    stats.mean_loss = if stats.steps > 0 {
        loss_sum / stats.steps as f64
    } else {
        0.0
    };
    stats.shuffles = injector.map_or(0, |i| i.shuffles());
    Ok(stats)
}

/// Top-1 accuracy on `data`.
pub fn evaluate(model: &MlpModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset(
            "cannot evaluate on an empty set".into(),
        ));
    }
    let mut correct = 0usize;
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(2048) {
        let (x, y) = data.gather(chunk);
        let pred = argmax_rows(&predict_scores(model, &x)?);
        correct += pred.iter().zip(&y).filter(|(p, t)| p == t).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mean cross-entropy on `data`.
pub fn mean_loss(model: &MlpModel, data: &Dataset) -> Result<f64> {
    let all: Vec<usize> = (0..data.len()).collect();
    let (x, y) = data.gather(&all);
    let scores = predict_scores(model, &x)?;
    Ok(softmax_cross_entropy(&scores, &y)?.0)
}
