//! Seeded parameter initializers.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::real::Real;
use crate::tensor::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))` for a `[fan_in, fan_out]` matrix.
pub fn glorot_uniform<F: Real, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_in, fan_out], limit)
}

/// Uniform in `±limit` with an arbitrary shape.
pub fn uniform<F: Real, R: Rng>(rng: &mut R, shape: &[usize], limit: f64) -> Tensor<F> {
    let n: usize = shape.iter().product();
    let dist = Uniform::new_inclusive(-limit, limit);
    let data = (0..n).map(|_| F::lit(dist.sample(rng))).collect();
    Tensor::new(shape, data).expect("length matches shape")
}

/// Normal(0, std) entries.
pub fn normal<F: Real, R: Rng>(rng: &mut R, shape: &[usize], std: f64) -> Tensor<F> {
    let n: usize = shape.iter().product();
    let dist = Normal::new(0.0, std).expect("finite std");
    let data = (0..n).map(|_| F::lit(dist.sample(rng))).collect();
    Tensor::new(shape, data).expect("length matches shape")
}

/// Embedding table `[rows, dim]` drawn from Normal(0, dim^-1/2).
pub fn embedding<F: Real, R: Rng>(rng: &mut R, rows: usize, dim: usize) -> Tensor<F> {
    normal(rng, &[rows, dim], (dim as f64).powf(-0.5))
}
