use super::{Float, Tensor};
use crate::error::{Error, Result};
use rand::Rng;

/// Glorot/Xavier uniform: i.i.d. `U(−b, b)` with `b = √(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Float, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidInput(format!("xavier init needs positive fans, got {fan_in}/{fan_out}")));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::c(rng.random_range(-bound..bound))).collect();
    Tensor::new(shape.to_vec(), data)
}
