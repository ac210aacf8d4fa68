//! Datasets, partitioning and batching.

mod idx;
mod partition;
mod synthetic;

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use partition::{
    label_distribution_tv, partition_dirichlet, partition_stats, PartitionSpec,
    MAX_PARTITION_ATTEMPTS,
};
pub use synthetic::gen_synthetic;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// Feature rows with integer class labels in `0..classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyDataset("dataset has no samples".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::config(format!("label {bad} outside 0..{classes}")));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Features and labels of the given rows, in the given order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let (x, y) = self.gather(indices);
        Dataset::new(x, y, self.classes)
    }

    /// Row indices grouped by label.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    pub fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Splits off the first `n` rows (after a seeded shuffle) as one set and
    /// the rest as another.
    pub fn split(&self, n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        SeededRng::new(seed).shuffle(&mut idx);
        let (a, b) = idx.split_at(n.min(self.len()));
        Ok((self.subset(a)?, self.subset(b)?))
    }
}

/// One client's share of a parent dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientDataset {
    pub id: usize,
    pub indices: Vec<usize>,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One epoch's mini-batches over `indices`, shuffled by `rng`. The last
/// batch may be short.
pub fn epoch_batches(indices: &[usize], batch_size: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be >= 1");
    let mut order = indices.to_vec();
    rng.shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_everything_once() {
        let idx: Vec<usize> = (10..33).collect();
        let mut rng = SeededRng::new(1);
        let batches = epoch_batches(&idx, 5, &mut rng);
        assert_eq!(batches.len(), 5);
        assert_eq!(batches.last().unwrap().len(), 3);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, idx);
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(
            Dataset::new(Matrix::zeros(0, 2), vec![], 2),
            Err(Error::EmptyDataset(_))
        ));
        assert!(Dataset::new(Matrix::zeros(2, 2), vec![0, 3], 2).is_err());
        assert!(Dataset::new(Matrix::zeros(2, 2), vec![0], 2).is_err());
    }
}
