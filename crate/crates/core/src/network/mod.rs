//! Multilayer perceptron with optional position-aware neurons (PANs).

pub mod checkpoint;
mod encoding;
mod model;
mod optim;
mod propagate;
mod sensitivity;

pub use encoding::{gen_encoding, PanConfig, PanMode};
pub use model::{Activation, Gradients, Layer, MlpModel};
pub use optim::{sgd_step, OptimState};
pub use propagate::{
    argmax_rows, backward, backward_full, forward, forward_with_encodings, predict_scores,
    softmax_cross_entropy, LayerActivations,
};
pub use sensitivity::{jacobian_wrt_encoding, ENCODING_FD_STEP};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use crate::rng::SeededRng;

    fn two_neuron(pan: PanConfig) -> MlpModel {
        let hidden = Layer {
            weight: Matrix::identity(2),
            bias: Vector::zeros(2),
        };
        let out = Layer {
            weight: Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            bias: Vector::zeros(1),
        };
        MlpModel::from_layers(vec![hidden, out], pan, 0)
            .unwrap()
            .with_hidden_activation(Activation::Identity)
    }

    fn with_encoding(model: &MlpModel, e: &[f64]) -> f64 {
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let acts = forward_with_encodings(model, &x, &[Vector::new(e.to_vec())]).unwrap();
        acts.output()[(0, 0)]
    }

    #[test]
    fn hand_evaluated_forward() {
        let mul = two_neuron(PanConfig::multiplicative(0.1, 1.0));
        assert!((with_encoding(&mul, &[1.1, 0.9]) - 2.9).abs() < 1e-12);
        let add = two_neuron(PanConfig::additive(0.1, 1.0));
        assert!((with_encoding(&add, &[0.1, -0.1]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let m = MlpModel::new(&[3, 4, 2], PanConfig::off(), 0).unwrap();
        assert!(matches!(
            forward(&m, &Matrix::zeros(2, 5)),
            Err(crate::Error::Shape(_))
        ));
    }

    #[test]
    fn zero_amplitude_matches_off() {
        let mut rng = SeededRng::new(3);
        let x = Matrix::from_vec(6, 5, rng.gaussian_vec(30, 0.0, 1.0)).unwrap();
        let base = MlpModel::new(&[5, 7, 6, 3], PanConfig::off(), 9).unwrap();
        let labels = [0, 1, 2, 0, 1, 2];
        let reference = {
            let acts = forward(&base, &x).unwrap();
            let (_, g) = softmax_cross_entropy(acts.output(), &labels).unwrap();
            (acts.output().clone(), backward(&base, &acts, &g).unwrap())
        };
        for pan in [
            PanConfig::additive(0.0, 2.0),
            PanConfig::multiplicative(0.0, 1.0),
        ] {
            let mut m = base.clone();
            m.set_pan(pan).unwrap();
            let acts = forward(&m, &x).unwrap();
            let (_, g) = softmax_cross_entropy(acts.output(), &labels).unwrap();
            assert_eq!(acts.output(), &reference.0);
            assert_eq!(backward(&m, &acts, &g).unwrap(), reference.1);
        }
    }

    #[test]
    fn multiplicative_bias_gradient_is_encoding() {
        let cfg = PanConfig::multiplicative(0.3, 1.0);
        let e = gen_encoding(4, &cfg);
        let hidden = Layer {
            weight: Matrix::from_fn(4, 3, |r, c| (r + 2 * c) as f64 * 0.1),
            bias: Vector::new(vec![0.2, -0.1, 0.4, 0.0]),
        };
        let out = Layer {
            weight: Matrix::identity(4),
            bias: Vector::zeros(4),
        };
        let model = MlpModel::from_layers(vec![hidden, out], cfg, 0)
            .unwrap()
            .with_hidden_activation(Activation::Identity);
        let x = Matrix::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap();
        let acts = forward(&model, &x).unwrap();
        for j in 0..4 {
            let mut seed = Matrix::zeros(1, 4);
            seed[(0, j)] = 1.0;
            let g = backward(&model, &acts, &seed).unwrap();
            let db = g.layers()[0].bias.as_slice();
            for (k, &v) in db.iter().enumerate() {
                let want = if k == j { e[j] } else { 0.0 };
                assert_eq!(v, want);
            }
        }
    }

    #[test]
    fn encodings_identical_across_models() {
        let cfg = PanConfig::multiplicative(0.1, 1.0);
        let a = MlpModel::new(&[4, 16, 8, 3], cfg, 1).unwrap();
        let b = MlpModel::new(&[4, 16, 8, 3], cfg, 2).unwrap();
        assert_ne!(a.layers(), b.layers());
        assert_eq!(a.encodings(), b.encodings());
        assert_eq!(a.encodings()[0], gen_encoding(16, &cfg));
    }

    #[test]
    fn jacobian_requires_pans() {
        let m = MlpModel::new(&[3, 4, 4, 2], PanConfig::off(), 0).unwrap();
        assert!(matches!(
            jacobian_wrt_encoding(&m, &Matrix::zeros(1, 3)),
            Err(crate::Error::InvalidMode(_))
        ));
        let uneven = MlpModel::new(&[3, 4, 5, 2], PanConfig::additive(0.1, 1.0), 0).unwrap();
        assert!(jacobian_wrt_encoding(&uneven, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn jacobian_at_zero_amplitude_is_finite_and_nonzero() {
        let m = MlpModel::new(&[4, 6, 6, 2], PanConfig::additive(0.0, 1.0), 4).unwrap();
        let mut rng = SeededRng::new(1);
        let x = Matrix::from_vec(3, 4, rng.gaussian_vec(12, 0.0, 1.0)).unwrap();
        let jac = jacobian_wrt_encoding(&m, &x).unwrap();
        assert_eq!(jac.shape(), (6, 6));
        assert!(jac.is_finite());
        assert!(jac.frobenius_norm() > 0.0);
    }

    #[test]
    fn cross_entropy_gradient() {
        let logits = Matrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![-1.0, 0.0, 3.0]]).unwrap();
        let labels = [1, 2];
        let (loss, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let h = 1e-6;
        for r in 0..2 {
            for c in 0..3 {
                let mut p = logits.clone();
                p[(r, c)] += h;
                let mut m = logits.clone();
                m[(r, c)] -= h;
                let fd = (softmax_cross_entropy(&p, &labels).unwrap().0
                    - softmax_cross_entropy(&m, &labels).unwrap().0)
                    / (2.0 * h);
                assert!((fd - grad[(r, c)]).abs() < 1e-8);
            }
        }
        assert!(loss > 0.0);
        assert!(softmax_cross_entropy(&logits, &[0, 5]).is_err());
    }
}
