use rand::Rng;

use super::tensor::Tensor;

/// Uniform in `±sqrt(6 / fan_in)`, for layers feeding ReLU-family activations.
pub fn kaiming_uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    uniform(rng, shape, (6.0 / fan_in as f64).sqrt())
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`, for layers feeding sigmoid/tanh.
pub fn xavier_uniform<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor {
    uniform(rng, shape, (6.0 / (fan_in + fan_out) as f64).sqrt())
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product matches")
}
