use super::model::{Gradients, Layer, MlpModel};
use crate::error::{Error, Result};

/// SGD with heavy-ball momentum and an optional proximal pull toward an
/// anchor model.
///
/// Per step: `g' = g + μ_prox (θ - θ_anchor)`, `v ← m v + g'`,
/// `θ ← θ - lr_t v`, where `lr_t` ramps linearly over the warm-up steps.
#[derive(Clone, Debug)]
pub struct OptimState {
    pub lr: f64,
    pub momentum: f64,
    pub prox_mu: f64,
    pub warmup_steps: usize,
    anchor: Option<Vec<Layer>>,
    buffers: Option<Vec<Layer>>,
    steps: usize,
}

impl OptimState {
    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            prox_mu: 0.0,
            warmup_steps: 0,
            anchor: None,
            buffers: None,
            steps: 0,
        }
    }

    /// Enables the proximal term with the given anchor parameters.
    pub fn with_proximal(mut self, mu: f64, anchor: &MlpModel) -> Self {
        self.prox_mu = mu;
        self.anchor = Some(anchor.layers().to_vec());
        self
    }

    pub fn with_warmup(mut self, steps: usize) -> Self {
        self.warmup_steps = steps;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn buffers(&self) -> Option<&[Layer]> {
        self.buffers.as_deref()
    }

    pub(crate) fn buffers_mut(&mut self) -> Option<&mut Vec<Layer>> {
        self.buffers.as_mut()
    }

    fn current_lr(&self) -> f64 {
        if self.warmup_steps == 0 || self.steps >= self.warmup_steps {
            self.lr
        } else {
            self.lr * (self.steps + 1) as f64 / self.warmup_steps as f64
        }
    }
}

pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, opt: &mut OptimState) -> Result<()> {
    model.check_layers_match(grads.layers())?;
    if let Some(anchor) = &opt.anchor {
        model.check_layers_match(anchor)?;
    }
    if opt.buffers.is_none() {
        opt.buffers = Some(
            model
                .layers()
                .iter()
                .map(|l| Layer::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        );
    }
    let lr = opt.current_lr();
    let (momentum, mu) = (opt.momentum, opt.prox_mu);
    let anchor = opt.anchor.as_deref();
    let buffers = opt
        .buffers
        .as_mut()
        .ok_or_else(|| Error::config("no buffers"))?;

    for (i, (layer, grad)) in model
        .layers_mut()
        .iter_mut()
        .zip(grads.layers())
        .enumerate()
    {
        let buf = &mut buffers[i];
        let anchor_layer = anchor.map(|a| &a[i]);
        update(
            layer.weight.data_mut(),
            grad.weight.data(),
            buf.weight.data_mut(),
            anchor_layer.map(|a| a.weight.data()),
            lr,
            momentum,
            mu,
        );
        update(
            layer.bias.as_mut_slice(),
            grad.bias.as_slice(),
            buf.bias.as_mut_slice(),
            anchor_layer.map(|a| a.bias.as_slice()),
            lr,
            momentum,
            mu,
        );
    }
    opt.steps += 1;
    Ok(())
}

fn update(
    theta: &mut [f64],
    grad: &[f64],
    buf: &mut [f64],
    anchor: Option<&[f64]>,
    lr: f64,
    momentum: f64,
    mu: f64,
) {
    for k in 0..theta.len() {
        let mut g = grad[k];
        if let Some(a) = anchor {
            if mu != 0.0 {
                g += mu * (theta[k] - a[k]);
            }
        }
        buf[k] = momentum * buf[k] + g;
        theta[k] -= lr * buf[k];
    }
}
