//! Forward and backward passes.
//!
//! Batches are row-major: one sample per row. For hidden layer `l` the pass
//! computes `s_l = W_l h_{l-1} + b_l`, fuses the encoding into `z_l`
//! (`s_l + e_l` or `s_l ⊙ e_l`), then `h_l = f_l(z_l)`.

use super::encoding::PanMode;
use super::model::{Gradients, Layer, MlpModel};
use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_at, matmul_bt, Matrix, Vector};

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct LayerActivations {
    /// `h_0`, the batch itself.
    pub input: Matrix,
    /// `s_l` per layer, before encoding fusion.
    pub linear: Vec<Matrix>,
    /// `z_l` per layer, the argument of the activation function.
    pub fused: Vec<Matrix>,
    /// `h_l` per layer; the last entry is the model output.
    pub post: Vec<Matrix>,
    mode: PanMode,
    encodings: Vec<Vector>,
}

impl LayerActivations {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("at least one layer")
    }

    /// `h_l` for `l` in `0..=L`.
    pub fn hidden(&self, l: usize) -> &Matrix {
        if l == 0 {
            &self.input
        } else {
            &self.post[l - 1]
        }
    }
}

pub fn forward(model: &MlpModel, batch: &Matrix) -> Result<LayerActivations> {
    forward_with_encodings(model, batch, model.encodings())
}

/// Forward pass with caller-supplied hidden encodings (one per hidden
/// layer). Used for encoding-sensitivity probes; `forward` passes the
/// model's own encodings.
pub fn forward_with_encodings(
    model: &MlpModel,
    batch: &Matrix,
    encodings: &[Vector],
) -> Result<LayerActivations> {
    if batch.cols() != model.input_dim() {
        return Err(Error::shape(format!(
            "batch has {} features, model expects {}",
            batch.cols(),
            model.input_dim()
        )));
    }
    let hidden = model.depth() - 1;
    if encodings.len() != hidden
        || encodings
            .iter()
            .zip(model.hidden_sizes())
            .any(|(e, &w)| e.len() != w)
    {
        return Err(Error::shape("encodings do not match hidden widths"));
    }
    let mode = model.pan().mode;
    let mut linear = Vec::with_capacity(model.depth());
    let mut fused = Vec::with_capacity(model.depth());
    let mut post: Vec<Matrix> = Vec::with_capacity(model.depth());

    for (i, (layer, act)) in model.layers().iter().zip(model.activations()).enumerate() {
        let prev = if i == 0 { batch } else { &post[i - 1] };
        let mut s = matmul_bt(prev, &layer.weight)?;
        for r in 0..s.rows() {
            for (v, b) in s.row_mut(r).iter_mut().zip(layer.bias.as_slice()) {
                *v += b;
            }
        }
        let z = if i < hidden && mode != PanMode::Off {
            let e = encodings[i].as_slice();
            let mut z = s.clone();
            for r in 0..z.rows() {
                for (v, ej) in z.row_mut(r).iter_mut().zip(e) {
                    match mode {
                        PanMode::Additive => *v += ej,
                        PanMode::Multiplicative => *v *= ej,
                        PanMode::Off => unreachable!(),
                    }
                }
            }
            z
        } else {
            s.clone()
        };
        let mut h = z.clone();
        h.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        linear.push(s);
        fused.push(z);
        post.push(h);
    }

    Ok(LayerActivations {
        input: batch.clone(),
        linear,
        fused,
        post,
        mode,
        encodings: encodings.to_vec(),
    })
}

/// Model outputs `h_L` for a batch.
pub fn predict_scores(model: &MlpModel, batch: &Matrix) -> Result<Matrix> {
    Ok(forward(model, batch)?
        .post
        .pop()
        .expect("at least one layer"))
}

/// Arg-max class per row, lowest index on ties.
pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Parameter gradients of the loss whose gradient with respect to the model
/// output is `loss_grad` (shape `batch × J_L`).
pub fn backward(
    model: &MlpModel,
    acts: &LayerActivations,
    loss_grad: &Matrix,
) -> Result<Gradients> {
    Ok(backward_full(model, acts, loss_grad)?.0)
}

/// As [`backward`], additionally returning `∂loss/∂h_l` for `l` in `0..L`
/// (index 0 is the input).
pub fn backward_full(
    model: &MlpModel,
    acts: &LayerActivations,
    loss_grad: &Matrix,
) -> Result<(Gradients, Vec<Matrix>)> {
    let depth = model.depth();
    let hidden = depth - 1;
    if acts.post.len() != depth || loss_grad.shape() != acts.output().shape() {
        return Err(Error::shape(
            "activations or loss gradient do not match model",
        ));
    }
    let mut grads: Vec<Option<Layer>> = vec![None; depth];
    let mut d_hidden: Vec<Matrix> = vec![Matrix::zeros(0, 0); depth];
    let mut dh = loss_grad.clone();

    for i in (0..depth).rev() {
        let layer = &model.layers()[i];
        let act = model.activations()[i];
        let z = &acts.fused[i];
        let mut ds = dh;
        for (g, &zv) in ds.data_mut().iter_mut().zip(z.data()) {
            *g *= act.derivative(zv);
        }
        if i < hidden && acts.mode == PanMode::Multiplicative {
            let e = acts.encodings[i].as_slice();
            for r in 0..ds.rows() {
                for (g, ej) in ds.row_mut(r).iter_mut().zip(e) {
                    *g *= ej;
                }
            }
        }
        let prev = acts.hidden(i);
        let weight = matmul_at(&ds, prev)?;
        let mut bias = vec![0.0; ds.cols()];
        for r in 0..ds.rows() {
            for (b, g) in bias.iter_mut().zip(ds.row(r)) {
                *b += g;
            }
        }
        dh = matmul(&ds, &layer.weight)?;
        d_hidden[i] = dh.clone();
        grads[i] = Some(Layer {
            weight,
            bias: Vector::new(bias),
        });
    }
    Ok((
        Gradients(grads.into_iter().map(|g| g.expect("filled")).collect()),
        d_hidden,
    ))
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let n = logits.rows() as f64;
    let classes = logits.cols();
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Index(format!("label {y} with {classes} outputs")));
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln() + max;
        loss += log_sum - row[y];
        let g = grad.row_mut(r);
        for (j, gv) in g.iter_mut().enumerate() {
            *gv = (row[j] - log_sum).exp() / n;
        }
        g[y] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}
