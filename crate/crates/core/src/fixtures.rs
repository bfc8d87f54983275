//! Seeded random networks and points, used by the examples and test suites.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::network::{BatchNormParams, DenseLayer, NetworkModel};

/// Random network with layer widths `dims` (input first, classes last) on `[-1, 1]^d`.
/// Weights are Xavier-uniform, biases uniform on `[-0.5, 0.5]`. With `bn`, every
/// hidden layer gets a random inference-time BN record.
pub fn random_model<R: Rng>(rng: &mut R, dims: &[usize], bn: bool) -> NetworkModel {
    assert!(dims.len() >= 2);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for l in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-a..a));
        let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-0.5..0.5));
        let mut layer = DenseLayer::new(weight, bias);
        if bn && l + 2 < dims.len() {
            layer.bn = Some(BatchNormParams {
                gamma: (0..fan_out).map(|_| rng.random_range(0.5..1.5)).collect(),
                beta: (0..fan_out).map(|_| rng.random_range(-0.3..0.3)).collect(),
                mean: (0..fan_out).map(|_| rng.random_range(-0.5..0.5)).collect(),
                var: (0..fan_out).map(|_| rng.random_range(0.2..2.0)).collect(),
                eps: 1e-5,
            });
        }
        layers.push(layer);
    }
    NetworkModel::new(layers, (-1.0, 1.0)).expect("random model is well formed")
}

/// Uniform point in `[-1, 1]^d`.
pub fn random_point<R: Rng>(rng: &mut R, d: usize) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0))
}

/// Uniform point in `[lo, hi]^d`.
pub fn random_point_in<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| rng.random_range(lo..hi))
}
