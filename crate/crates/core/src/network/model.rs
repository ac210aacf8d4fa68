use serde::{Deserialize, Serialize};

use super::encoding::{gen_encoding, PanConfig, PanMode};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Weights `W` (out × in) and bias `b` of one dense layer. Also used as the
/// container for gradients and optimizer buffers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vector,
}

impl Layer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: Vector::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.weight.shape() == other.weight.shape() && self.bias.len() == other.bias.len()
    }
}

/// Per-layer parameter gradients, shaped like the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Layer>);

impl Gradients {
    pub fn layers(&self) -> &[Layer] {
        &self.0
    }
}

/// A dense feed-forward network with ReLU hidden layers, an identity output
/// layer and optional position-aware hidden neurons.
///
/// Layer `l` (1-based, as in `W_l`) lives at `layers[l - 1]`. Hidden layers
/// are `1..L`; the output layer `L` never carries an encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    activations: Vec<Activation>,
    pan: PanConfig,
    encodings: Vec<Vector>,
    seed: u64,
}

impl MlpModel {
    /// Kaiming-uniform initialisation: `W ~ U(-√(6/fan_in), √(6/fan_in))`,
    /// zero biases.
    pub fn new(sizes: &[usize], pan: PanConfig, seed: u64) -> Result<Self> {
        validate_sizes(sizes)?;
        pan.validate()?;
        let mut rng = SeededRng::new(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weight =
                    Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform_range(-bound, bound));
                Layer {
                    weight,
                    bias: Vector::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self::assemble(sizes.to_vec(), layers, pan, seed))
    }

    /// Builds a model from explicit parameters. Hidden layers use ReLU.
    pub fn from_layers(layers: Vec<Layer>, pan: PanConfig, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("a model needs at least one layer"));
        }
        let mut sizes = vec![layers[0].in_dim()];
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != *sizes.last().unwrap() {
                return Err(Error::shape(format!(
                    "layer {} expects {} inputs, previous layer has {}",
                    i + 1,
                    layer.in_dim(),
                    sizes.last().unwrap()
                )));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::shape(format!("layer {} bias length", i + 1)));
            }
            sizes.push(layer.out_dim());
        }
        validate_sizes(&sizes)?;
        pan.validate()?;
        Ok(Self::assemble(sizes, layers, pan, seed))
    }

    fn assemble(sizes: Vec<usize>, layers: Vec<Layer>, pan: PanConfig, seed: u64) -> Self {
        let depth = layers.len();
        let activations = (0..depth)
            .map(|i| {
                if i + 1 == depth {
                    Activation::Identity
                } else {
                    Activation::Relu
                }
            })
            .collect();
        let encodings = hidden_encodings(&sizes, &pan);
        Self {
            sizes,
            layers,
            activations,
            pan,
            encodings,
            seed,
        }
    }

    /// Replaces the hidden-layer activation (the output stays identity).
    pub fn with_hidden_activation(mut self, act: Activation) -> Self {
        let depth = self.depth();
        for a in &mut self.activations[..depth - 1] {
            *a = act;
        }
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Widths of hidden layers `1..L`.
    pub fn hidden_sizes(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn pan(&self) -> &PanConfig {
        &self.pan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Swaps in a new PAN configuration; parameters are kept.
    pub fn set_pan(&mut self, pan: PanConfig) -> Result<()> {
        pan.validate()?;
        self.encodings = hidden_encodings(&self.sizes, &pan);
        self.pan = pan;
        Ok(())
    }

    /// Encodings of hidden layers `1..L`, index `l - 1`.
    pub fn encodings(&self) -> &[Vector] {
        &self.encodings
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.as_slice());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "{} parameters for a model with {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weight.data().len();
            l.weight
                .data_mut()
                .copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let n = l.bias.len();
            l.bias
                .as_mut_slice()
                .copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &MlpModel) -> bool {
        self.sizes == other.sizes
    }

    pub fn check_same_architecture(&self, other: &MlpModel) -> Result<()> {
        if self.same_architecture(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "architectures differ: {:?} vs {:?}",
                self.sizes, other.sizes
            )))
        }
    }

    /// Euclidean distance between the flattened parameters of two models.
    pub fn param_distance(&self, other: &MlpModel) -> Result<f64> {
        self.check_same_architecture(other)?;
        Ok(self
            .flat_params()
            .iter()
            .zip(other.flat_params())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// `(1 - mu) * self + mu * other`, keeping `self`'s PAN config.
    pub fn interpolate(&self, other: &MlpModel, mu: f64) -> Result<MlpModel> {
        self.check_same_architecture(other)?;
        let a = self.flat_params();
        let b = other.flat_params();
        let mixed: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (1.0 - mu) * x + mu * y)
            .collect();
        let mut out = self.clone();
        out.set_flat_params(&mixed)?;
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.as_slice().iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_layers_match(&self, other: &[Layer]) -> Result<()> {
        if other.len() != self.layers.len()
            || self.layers.iter().zip(other).any(|(a, b)| !a.same_shape(b))
        {
            return Err(Error::shape("parameter set does not match model layers"));
        }
        Ok(())
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::shape("a model needs an input and an output size"));
    }
    if sizes.contains(&0) {
        return Err(Error::shape(format!("zero-width layer in {sizes:?}")));
    }
    Ok(())
}

fn hidden_encodings(sizes: &[usize], pan: &PanConfig) -> Vec<Vector> {
    sizes[1..sizes.len() - 1]
        .iter()
        .map(|&w| match pan.mode {
            PanMode::Off => Vector::zeros(w),
            _ => gen_encoding(w, pan),
        })
        .collect()
}
