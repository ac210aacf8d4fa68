//! Post-hoc alignment diagnostics between models: activation matching,
//! class preference vectors and interpolation (fusion) curves.

pub mod hungarian;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::Matrix;
use crate::network::{backward_full, forward, MlpModel};
use crate::train::evaluate;

/// Per-neuron activation vectors of one hidden layer over `m` probe
/// samples, shape `J_l × m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationProfile {
    pub layer: usize,
    pub activations: Matrix,
}

pub fn collect_activations(
    model: &MlpModel,
    probe: &Matrix,
    layer: usize,
) -> Result<ActivationProfile> {
    if layer == 0 || layer >= model.depth() {
        return Err(Error::Index(format!(
            "layer {layer} is not hidden (hidden layers are 1..{})",
            model.depth()
        )));
    }
    if probe.rows() == 0 {
        return Err(Error::EmptyDataset("probe set is empty".into()));
    }
    let acts = forward(model, probe)?;
    Ok(ActivationProfile {
        layer,
        activations: acts.post[layer - 1].transpose(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssignmentResult {
    /// Global neuron `i` is matched to local neuron `assignment[i]`.
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Fraction of neurons matched to their own index.
    pub match_ratio: f64,
}

/// Pairwise L2 distances between neuron rows of two profiles.
pub fn distance_matrix(a: &ActivationProfile, b: &ActivationProfile) -> Result<Vec<Vec<f64>>> {
    let (x, y) = (&a.activations, &b.activations);
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "profiles {:?} and {:?} differ",
            x.shape(),
            y.shape()
        )));
    }
    Ok((0..x.rows())
        .map(|i| {
            (0..y.rows())
                .map(|j| {
                    x.row(i)
                        .iter()
                        .zip(y.row(j))
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect())
}

/// Cost of an assignment, summed in row order.
pub fn assignment_cost(costs: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i][j])
        .sum()
}

/// Optimal one-to-one matching of global neurons to local neurons by
/// activation distance.
pub fn match_neurons(
    global: &ActivationProfile,
    local: &ActivationProfile,
) -> Result<AssignmentResult> {
    let costs = distance_matrix(global, local)?;
    Ok(match_costs(&costs))
}

pub fn match_costs(costs: &[Vec<f64>]) -> AssignmentResult {
    let assignment = hungarian::solve(costs);
    let n = assignment.len();
    let fixed = assignment
        .iter()
        .enumerate()
        .filter(|(i, &j)| *i == j)
        .count();
    AssignmentResult {
        cost: assignment_cost(costs, &assignment),
        match_ratio: if n == 0 { 1.0 } else { fixed as f64 / n as f64 },
        assignment,
    }
}

/// Class preference of every neuron in one layer, shape `J_l × C`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceMatrix {
    pub layer: usize,
    pub values: Matrix,
    /// Preferred class per neuron; ties go to the lowest class index.
    pub argmax: Vec<usize>,
}

impl PreferenceMatrix {
    /// Fraction of neurons whose preferred class agrees with `other`'s.
    pub fn agreement(&self, other: &PreferenceMatrix) -> f64 {
        let same = self
            .argmax
            .iter()
            .zip(&other.argmax)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.argmax.len().max(1) as f64
    }
}

/// `p_c[j] = Σ_b h_j(x_{c,b}) · ∂Z_c/∂h_j(x_{c,b})` over the class-`c`
/// probe samples, where `h` is the post-activation of `layer` and `Z_c` the
/// class-`c` output score. `layer` may be a hidden layer or the output
/// layer `L`.
pub fn preference_vectors(
    model: &MlpModel,
    probe: &Dataset,
    layer: usize,
) -> Result<PreferenceMatrix> {
    let depth = model.depth();
    if layer == 0 || layer > depth {
        return Err(Error::Index(format!("layer {layer} outside 1..={depth}")));
    }
    let classes = model.output_dim();
    if probe.classes() > classes {
        return Err(Error::shape(
            "probe has more classes than the model outputs",
        ));
    }
    let by_class = probe.indices_by_class();
    let width = model.sizes()[layer];
    let mut values = Matrix::zeros(width, classes);
    for c in 0..classes {
        let members = by_class
            .get(c)
            .filter(|m| !m.is_empty())
            .ok_or_else(|| Error::config(format!("probe set has no sample of class {c}")))?;
        let (x, _) = probe.gather(members);
        let acts = forward(model, &x)?;
        let h = &acts.post[layer - 1];
        let mut seed = Matrix::zeros(x.rows(), classes);
        for r in 0..x.rows() {
            seed[(r, c)] = 1.0;
        }
        let grad_h = if layer == depth {
            seed
        } else {
            backward_full(model, &acts, &seed)?.1.swap_remove(layer)
        };
        for r in 0..x.rows() {
            for j in 0..width {
                values[(j, c)] += h[(r, j)] * grad_h[(r, j)];
            }
        }
    }
    let argmax = crate::network::argmax_rows(&values);
    Ok(PreferenceMatrix {
        layer,
        values,
        argmax,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusionCurve {
    pub mu: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Accuracy of `(1 − μ)θ_A + μθ_B` at each `μ` of the grid.
pub fn fusion_curve(
    model_a: &MlpModel,
    model_b: &MlpModel,
    test: &Dataset,
    grid: &[f64],
    exec: Execution,
) -> Result<FusionCurve> {
    model_a.check_same_architecture(model_b)?;
    let accuracy = exec.try_map(grid.len(), |i| {
        evaluate(&model_a.interpolate(model_b, grid[i])?, test)
    })?;
    Ok(FusionCurve {
        mu: grid.to_vec(),
        accuracy,
    })
}

/// `n` evenly spaced points on `[0, 1]`, endpoints included.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
