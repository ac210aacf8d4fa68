//! Dirichlet label-skew partitioning.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{ClientDataset, Dataset};
use crate::error::{Error, Result};
use crate::rng::{tags, SeededRng};

/// Redraws allowed before giving up on a partition that leaves a client
/// empty.
pub const MAX_PARTITION_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub clients: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// Splits `ds` across `spec.clients` clients. For every class, client shares
/// are drawn from `Dir(α·1_K)` and that class's (shuffled) samples are cut
/// at the cumulative shares. A draw that leaves any client empty is
/// discarded and redrawn.
pub fn partition_dirichlet(ds: &Dataset, spec: &PartitionSpec) -> Result<Vec<ClientDataset>> {
    let k = spec.clients;
    if k == 0 {
        return Err(Error::config("need at least one client"));
    }
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(Error::config(format!(
            "Dirichlet alpha must be > 0, got {}",
            spec.alpha
        )));
    }
    if k > ds.len() {
        return Err(Error::config(format!(
            "{k} clients cannot each get a sample from {} samples",
            ds.len()
        )));
    }
    let gamma = Gamma::new(spec.alpha, 1.0).map_err(|e| Error::config(e.to_string()))?;
    let by_class = ds.indices_by_class();

    for attempt in 0..MAX_PARTITION_ATTEMPTS {
        let mut rng = SeededRng::derive(spec.seed, tags::PARTITION, attempt as u64);
        let mut clients: Vec<Vec<usize>> = vec![Vec::new(); k];
        for members in &by_class {
            if members.is_empty() {
                continue;
            }
            let shares = dirichlet(&gamma, k, &mut rng);
            let mut order = members.clone();
            rng.shuffle(&mut order);
            let n = order.len();
            let mut start = 0;
            let mut cum = 0.0;
            for (c, share) in shares.iter().enumerate() {
                cum += share;
                let end = if c + 1 == k {
                    n
                } else {
                    ((cum * n as f64).round() as usize).clamp(start, n)
                };
                clients[c].extend_from_slice(&order[start..end]);
                start = end;
            }
        }
        if clients.iter().all(|c| !c.is_empty()) {
            return Ok(clients
                .into_iter()
                .enumerate()
                .map(|(id, mut indices)| {
                    indices.sort_unstable();
                    ClientDataset { id, indices }
                })
                .collect());
        }
    }
    Err(Error::config(format!(
        "no partition with every client nonempty after {MAX_PARTITION_ATTEMPTS} draws \
         (K={k}, alpha={})",
        spec.alpha
    )))
}

fn dirichlet(gamma: &Gamma<f64>, k: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        // tiny alphas can underflow every draw to zero
        if total > 0.0 && total.is_finite() {
            return draws.iter().map(|g| g / total).collect();
        }
    }
}

/// `(client, class, count)` rows for every client and class.
pub fn partition_stats(ds: &Dataset, clients: &[ClientDataset]) -> Vec<(usize, usize, usize)> {
    clients
        .iter()
        .flat_map(|c| {
            ds.class_counts(&c.indices)
                .into_iter()
                .enumerate()
                .map(move |(class, n)| (c.id, class, n))
        })
        .collect()
}

/// Mean total-variation distance between each client's label distribution
/// and the label distribution of the whole dataset.
pub fn label_distribution_tv(ds: &Dataset, clients: &[ClientDataset]) -> f64 {
    let all: Vec<usize> = (0..ds.len()).collect();
    let global = normalise(&ds.class_counts(&all));
    let total: f64 = clients
        .iter()
        .map(|c| {
            let local = normalise(&ds.class_counts(&c.indices));
            0.5 * local
                .iter()
                .zip(&global)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum();
    total / clients.len().max(1) as f64
}

fn normalise(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}
