//! Permutation plans, network shuffling and the shuffle test.
//!
//! A [`Permutation`] is stored as an index array `p` with `(Πx)[i] = x[p[i]]`,
//! i.e. row `i` of the dense matrix `Π` has its single one in column `p[i]`.
//! A [`PermutationPlan`] holds one permutation per hidden layer; the input
//! and output layers are never permuted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{Matrix, Vector};
use crate::network::{jacobian_wrt_encoding, predict_scores, Layer, MlpModel, OptimState};
use crate::rng::{tags, SeededRng};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Validates that `indices` is a bijection on `0..len`.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || seen[i] {
                return Err(Error::config(format!("{indices:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Permutation(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `Πx`.
    pub fn apply<T: Clone>(&self, x: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| x[i].clone()).collect()
    }

    /// `Πᵀ`, which is also `Π⁻¹`.
    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Permutation(inv)
    }

    /// The product `self · first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Permutation) -> Permutation {
        assert_eq!(
            self.len(),
            first.len(),
            "composing permutations of different size"
        );
        Permutation(self.0.iter().map(|&i| first.0[i]).collect())
    }

    /// Fraction of fixed points, the mean of `diag(Π)`.
    pub fn r_kept(&self) -> f64 {
        if self.0.is_empty() {
            return 1.0;
        }
        let kept = self.0.iter().enumerate().filter(|(i, &p)| *i == p).count();
        kept as f64 / self.0.len() as f64
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.0.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &p) in self.0.iter().enumerate() {
            m[(i, p)] = 1.0;
        }
        m
    }
}

/// Randomly disordered permutation of `width` rows.
///
/// Starting from the identity, each row `j` picks a partner uniformly among
/// the later rows `j+1..width` and is swapped with it with probability
/// `p_sf`. The last row has no later partner and never initiates a swap, so
/// at most `width - 1` swaps happen.
pub fn gen_permutation(width: usize, p_sf: f64, rng: &mut SeededRng) -> Permutation {
    assert!((0.0..=1.0).contains(&p_sf), "P_sf must lie in [0, 1]");
    let mut idx: Vec<usize> = (0..width).collect();
    for j in 0..width.saturating_sub(1) {
        let partner = rng.below(j + 1, width);
        if rng.uniform() < p_sf {
            idx.swap(j, partner);
        }
    }
    Permutation(idx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationPlan {
    layers: Vec<Permutation>,
    p_sf: f64,
}

impl PermutationPlan {
    pub fn identity(hidden_sizes: &[usize]) -> Self {
        Self {
            layers: hidden_sizes
                .iter()
                .map(|&w| Permutation::identity(w))
                .collect(),
            p_sf: 0.0,
        }
    }

    pub fn random(hidden_sizes: &[usize], p_sf: f64, rng: &mut SeededRng) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_sf) {
            return Err(Error::config(format!("P_sf = {p_sf} is outside [0, 1]")));
        }
        Ok(Self {
            layers: hidden_sizes
                .iter()
                .map(|&w| gen_permutation(w, p_sf, rng))
                .collect(),
            p_sf,
        })
    }

    pub fn for_model(model: &MlpModel, p_sf: f64, rng: &mut SeededRng) -> Result<Self> {
        Self::random(model.hidden_sizes(), p_sf, rng)
    }

    pub fn from_layers(layers: Vec<Permutation>, p_sf: f64) -> Self {
        Self { layers, p_sf }
    }

    pub fn layers(&self) -> &[Permutation] {
        &self.layers
    }

    pub fn p_sf(&self) -> f64 {
        self.p_sf
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(Permutation::is_identity)
    }

    /// Plan equivalent to applying `first` and then `self`.
    pub fn compose(&self, first: &PermutationPlan) -> Result<PermutationPlan> {
        if self.layers.len() != first.layers.len()
            || self
                .layers
                .iter()
                .zip(&first.layers)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::shape("composing plans for different architectures"));
        }
        Ok(PermutationPlan {
            layers: self
                .layers
                .iter()
                .zip(&first.layers)
                .map(|(a, b)| a.compose(b))
                .collect(),
            p_sf: self.p_sf,
        })
    }

    pub fn r_kept_per_layer(&self) -> Vec<f64> {
        self.layers.iter().map(Permutation::r_kept).collect()
    }

    /// `R_kept` averaged over hidden layers (1 for a plan with none).
    pub fn r_kept(&self) -> f64 {
        if self.layers.is_empty() {
            return 1.0;
        }
        self.r_kept_per_layer().iter().sum::<f64>() / self.layers.len() as f64
    }

    fn check(&self, layers: &[Layer]) -> Result<()> {
        let hidden: Vec<usize> = layers[..layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect();
        if hidden.len() != self.layers.len()
            || hidden.iter().zip(&self.layers).any(|(&w, p)| w != p.len())
        {
            return Err(Error::shape(format!(
                "plan widths {:?} do not match hidden widths {hidden:?}",
                self.layers.iter().map(Permutation::len).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }
}

/// Applies `W_l ← Π_l W_l Π_{l-1}ᵀ`, `b_l ← Π_l b_l` in place to any set of
/// layer-shaped tensors (parameters, gradients, momentum buffers).
pub fn permute_layers(layers: &mut [Layer], plan: &PermutationPlan) -> Result<()> {
    plan.check(layers)?;
    let depth = layers.len();
    for (l, layer) in layers.iter_mut().enumerate() {
        let rows = (l + 1 < depth).then(|| &plan.layers[l]);
        let cols = (l > 0).then(|| &plan.layers[l - 1]);
        if rows.is_none() && cols.is_none() {
            continue;
        }
        let w = &layer.weight;
        let row_of = |i: usize| rows.map_or(i, |p| p.0[i]);
        let col_of = |k: usize| cols.map_or(k, |p| p.0[k]);
        let weight = Matrix::from_fn(w.rows(), w.cols(), |i, k| w[(row_of(i), col_of(k))]);
        let bias = Vector::new((0..w.rows()).map(|i| layer.bias[row_of(i)]).collect());
        layer.weight = weight;
        layer.bias = bias;
    }
    Ok(())
}

/// A permuted copy of `model`. Encodings stay where they are: they belong to
/// positions, not to neurons.
pub fn shuffle_model(model: &MlpModel, plan: &PermutationPlan) -> Result<MlpModel> {
    let mut out = model.clone();
    permute_layers(out.layers_mut(), plan)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShuffleErrorStats {
    pub mean: f64,
    pub max: f64,
}

/// Output change caused by shuffling: per sample `‖h_L,sf − h_L‖₂ / J_L`,
/// summarised as mean and max over the batch.
pub fn shuffle_error(
    model: &MlpModel,
    plan: &PermutationPlan,
    batch: &Matrix,
) -> Result<ShuffleErrorStats> {
    if batch.rows() == 0 {
        return Err(Error::EmptyDataset(
            "shuffle error needs a nonempty batch".into(),
        ));
    }
    let shuffled = shuffle_model(model, plan)?;
    let before = predict_scores(model, batch)?;
    let after = predict_scores(&shuffled, batch)?;
    let out_dim = model.output_dim() as f64;
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for r in 0..batch.rows() {
        let d = before
            .row(r)
            .iter()
            .zip(after.row(r))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / out_dim;
        sum += d;
        max = max.max(d);
    }
    Ok(ShuffleErrorStats {
        mean: sum / batch.rows() as f64,
        max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShuffleReport {
    pub err_mean: f64,
    pub err_max: f64,
    pub r_kept_per_layer: Vec<f64>,
    pub r_kept: f64,
}

pub fn shuffle_test(
    model: &MlpModel,
    plan: &PermutationPlan,
    batch: &Matrix,
) -> Result<ShuffleReport> {
    let err = shuffle_error(model, plan, batch)?;
    Ok(ShuffleReport {
        err_mean: err.mean,
        err_max: err.max,
        r_kept_per_layer: plan.r_kept_per_layer(),
        r_kept: plan.r_kept(),
    })
}

/// First-order estimate of the shuffle error of a one-hidden-layer network
/// with a scalar output: `|(Πe − e)ᵀ ∂y_sf/∂e|`, the gradient taken on the
/// shuffled network at its own encoding. Averaged over the batch.
pub fn taylor_shuffle_error(
    model: &MlpModel,
    plan: &PermutationPlan,
    batch: &Matrix,
) -> Result<f64> {
    if model.depth() != 2 || model.output_dim() != 1 {
        return Err(Error::shape(
            "first-order estimate needs one hidden layer and a scalar output",
        ));
    }
    if batch.rows() == 0 {
        return Err(Error::EmptyDataset(
            "estimate needs a nonempty batch".into(),
        ));
    }
    let shuffled = shuffle_model(model, plan)?;
    let jac = jacobian_wrt_encoding(&shuffled, batch)?;
    let e = model.encodings()[0].as_slice();
    let pe = plan.layers()[0].apply(e);
    let delta: Vec<f64> = pe.iter().zip(e).map(|(a, b)| a - b).collect();
    let total: f64 = (0..batch.rows())
        .map(|r| crate::linalg::dot(&delta, jac.row(r)).abs())
        .sum();
    Ok(total / batch.rows() as f64)
}

/// Per-step shuffle probability for injecting `N_sf` expected shuffles into
/// one client's local run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShuffleSchedule {
    pub expected_shuffles: f64,
    /// `r_k = E · N_k / B`.
    pub local_steps: f64,
    /// `N_sf / r_k`, clamped to `[0, 1]`.
    pub step_probability: f64,
    pub p_sf: f64,
}

pub fn shuffle_injection_schedule(
    epochs: usize,
    samples: usize,
    batch_size: usize,
    expected_shuffles: f64,
    p_sf: f64,
) -> Result<ShuffleSchedule> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    if !(expected_shuffles >= 0.0) || !(0.0..=1.0).contains(&p_sf) {
        return Err(Error::config(format!(
            "need N_sf >= 0 and P_sf in [0, 1], got {expected_shuffles} and {p_sf}"
        )));
    }
    let local_steps = (epochs * samples) as f64 / batch_size as f64;
    if local_steps == 0.0 {
        return Err(Error::config(
            "shuffle schedule has zero local steps (E or N_k is zero)",
        ));
    }
    Ok(ShuffleSchedule {
        expected_shuffles,
        local_steps,
        step_probability: (expected_shuffles / local_steps).clamp(0.0, 1.0),
        p_sf,
    })
}

/// Drives shuffle injection during one local training run and tracks the
/// accumulated permutation `Π_{r}···Π_1`.
///
/// The injector draws from its own stream, so a run with shuffles sees the
/// same batches as the run without them.
#[derive(Clone, Debug)]
pub struct ShuffleInjector {
    schedule: ShuffleSchedule,
    accumulated: PermutationPlan,
    shuffles: usize,
    rng: SeededRng,
}

impl ShuffleInjector {
    pub fn new(schedule: ShuffleSchedule, hidden_sizes: &[usize], rng: SeededRng) -> Self {
        Self {
            schedule,
            accumulated: PermutationPlan::identity(hidden_sizes),
            shuffles: 0,
            rng,
        }
    }

    /// One local step's draw. On a hit, the model and any optimizer momentum
    /// are permuted together; the proximal anchor is left alone.
    pub fn step(&mut self, model: &mut MlpModel, opt: Option<&mut OptimState>) -> Result<bool> {
        if self.rng.uniform() >= self.schedule.step_probability {
            return Ok(false);
        }
        let plan = PermutationPlan::for_model(model, self.schedule.p_sf, &mut self.rng)?;
        permute_layers(model.layers_mut(), &plan)?;
        if let Some(buffers) = opt.and_then(|o| o.buffers_mut()) {
            permute_layers(buffers, &plan)?;
        }
        self.accumulated = plan.compose(&self.accumulated)?;
        self.shuffles += 1;
        Ok(true)
    }

    pub fn shuffles(&self) -> usize {
        self.shuffles
    }

    pub fn accumulated(&self) -> &PermutationPlan {
        &self.accumulated
    }

    pub fn r_kept(&self) -> f64 {
        self.accumulated.r_kept()
    }
}

/// Single-layer simulation of shuffle injection: `runs` independent local
/// runs of `local_steps` steps over a layer of `width` neurons, each step
/// shuffling with probability `N_sf / local_steps`. Returns the mean
/// `R_kept` of the accumulated permutation. Run `i` uses its own stream
/// derived from `seed`.
pub fn simulate_injection_r_kept(
    width: usize,
    local_steps: usize,
    expected_shuffles: f64,
    p_sf: f64,
    runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    if runs == 0 || local_steps == 0 {
        return Err(Error::config("need at least one run and one local step"));
    }
    let prob = (expected_shuffles / local_steps as f64).clamp(0.0, 1.0);
    let kept = exec.map(runs, |run| {
        let mut rng = SeededRng::derive(seed, tags::SHUFFLE, run as u64);
        let mut acc = Permutation::identity(width);
        for _ in 0..local_steps {
            if rng.uniform() < prob {
                acc = gen_permutation(width, p_sf, &mut rng).compose(&acc);
            }
        }
        acc.r_kept()
    });
    Ok(kept.iter().sum::<f64>() / runs as f64)
}

/// Mean `R_kept` of a single generated permutation over `runs` draws.
pub fn mean_r_kept(width: usize, p_sf: f64, runs: usize, seed: u64, exec: Execution) -> f64 {
    let kept = exec.map(runs, |run| {
        let mut rng = SeededRng::derive(seed, tags::SHUFFLE, run as u64);
        gen_permutation(width, p_sf, &mut rng).r_kept()
    });
    kept.iter().sum::<f64>() / runs.max(1) as f64
}
