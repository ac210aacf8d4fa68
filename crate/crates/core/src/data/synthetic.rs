use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// `classes` isotropic unit-variance Gaussian blobs in `dim` dimensions.
///
/// Each class mean is a random direction scaled to length
/// `class_separation`, so the gap between two means is about
/// `√2 · class_separation` standard deviations. Labels are balanced
/// (`i mod classes` before a seeded shuffle of the rows).
pub fn gen_synthetic(
    n: usize,
    dim: usize,
    classes: usize,
    class_separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || n < classes || dim == 0 {
        return Err(Error::config(format!(
            "synthetic data needs n >= classes >= 1 and dim >= 1 (n={n}, classes={classes}, dim={dim})"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let g = rng.gaussian_vec(dim, 0.0, 1.0);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            g.iter().map(|v| v * class_separation / norm).collect()
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    rng.shuffle(&mut labels);
    let mut data = Vec::with_capacity(n * dim);
    for &y in &labels {
        for &m in &means[y] {
            data.push(m + rng.standard_normal());
        }
    }
    Dataset::new(Matrix::from_vec(n, dim, data)?, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = gen_synthetic(100, 4, 5, 3.0, 9).unwrap();
        let b = gen_synthetic(100, 4, 5, 3.0, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(&(0..100).collect::<Vec<_>>()), vec![20; 5]);
        assert_ne!(a, gen_synthetic(100, 4, 5, 3.0, 10).unwrap());
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(gen_synthetic(3, 2, 5, 1.0, 0).is_err());
    }
}
