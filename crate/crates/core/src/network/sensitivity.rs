//! Sensitivity of the model output to its position encodings.

use super::encoding::PanMode;
use super::model::MlpModel;
use super::propagate::forward_with_encodings;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Finite-difference step used by [`jacobian_wrt_encoding`].
pub const ENCODING_FD_STEP: f64 = 1e-5;

/// Numeric Jacobian `∂h_L/∂e` where one encoding vector `e` is shared by
/// every hidden layer and perturbed in all of them at once.
///
/// Rows are `(sample, output)` pairs in sample-major order; columns are the
/// encoding positions. Requires PANs on and equal hidden widths.
pub fn jacobian_wrt_encoding(model: &MlpModel, batch: &Matrix) -> Result<Matrix> {
    if model.pan().mode == PanMode::Off {
        return Err(Error::InvalidMode(
            "encoding Jacobian needs PANs switched on".into(),
        ));
    }
    let widths = model.hidden_sizes();
    let width = *widths
        .first()
        .ok_or_else(|| Error::shape("model has no hidden layer"))?;
    if widths.iter().any(|&w| w != width) {
        return Err(Error::shape(format!(
            "hidden widths must be equal, got {widths:?}"
        )));
    }
    let base = model.encodings()[0].clone();
    let depth = widths.len();
    let outputs = model.output_dim();
    let mut jac = Matrix::zeros(batch.rows() * outputs, width);

    let eval = |e: &Vector| -> Result<Matrix> {
        let encs = vec![e.clone(); depth];
        Ok(forward_with_encodings(model, batch, &encs)?
            .output()
            .clone())
    };
    for j in 0..width {
        let mut plus = base.clone();
        plus[j] += ENCODING_FD_STEP;
        let mut minus = base.clone();
        minus[j] -= ENCODING_FD_STEP;
        let (hp, hm) = (eval(&plus)?, eval(&minus)?);
        for (row, (a, b)) in hp.data().iter().zip(hm.data()).enumerate() {
            jac[(row, j)] = (a - b) / (2.0 * ENCODING_FD_STEP);
        }
    }
    Ok(jac)
}
