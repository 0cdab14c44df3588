//! The epsilon-prediction training loss.

use crate::diffuse::forward_diffuse;
use crate::{DdpmError, Result};
use lidarseq_tensor::{Scalar, Tensor};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Mean-squared error between sampled noise and the model's prediction.
///
/// `x0` is a batch `[B, ...]` of clean samples in [-1, 1]. Each batch element
/// gets its own `t ~ Uniform(t_floor, 1 - t_floor)` and noise draw; the
/// predictor sees the per-element times. Returns the scalar loss tensor
/// (differentiable through the prediction) plus the drawn times.
pub fn train_loss<T, P>(
    predict: P,
    x0: &Tensor<T>,
    t_floor: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(Tensor<T>, Vec<f64>)>
where
    T: Scalar,
    P: FnOnce(&Tensor<T>, &[f64]) -> Result<Tensor<T>>,
{
    let shape = x0.shape().to_vec();
    if shape.is_empty() {
        return Err(DdpmError::Contract("batch must have a leading batch axis".into()));
    }
    if !(0.0..0.5).contains(&t_floor) {
        return Err(DdpmError::Contract(format!("t_floor = {} outside (0, 0.5)", t_floor)));
    }
    let batch = shape[0];
    let row = x0.len() / batch;
    let eps = Tensor::<T>::randn(&shape, rng);
    let times: Vec<f64> = (0..batch).map(|_| rng.gen_range(t_floor..1.0 - t_floor)).collect();

    // per-element forward diffusion (each row has its own schedule point)
    let mut x_t = vec![T::zero(); x0.len()];
    x0.with_data(|xd| {
        eps.with_data(|ed| {
            for (b, &t) in times.iter().enumerate() {
                let (alpha, sigma) = crate::schedule_at(t).expect("t in range by construction");
                let (a, s) = (T::from_f64(alpha), T::from_f64(sigma));
                for k in b * row..(b + 1) * row {
                    x_t[k] = a * xd[k] + s * ed[k];
                }
            }
        })
    });
    let x_t = Tensor::from_vec(&shape, x_t)?;

    let eps_hat = predict(&x_t, &times)?;
    if eps_hat.shape() != shape.as_slice() {
        return Err(DdpmError::Tensor(lidarseq_tensor::TensorError::Dim {
            op: "train_loss",
            msg: format!("prediction {:?} vs noise {:?}", eps_hat.shape(), shape),
        }));
    }
    let loss = eps_hat.sub(&eps)?.sqr().mean_all()?;
    Ok((loss, times))
}

/// Single-time variant used by tests and oracles: the whole batch shares `t`.
pub fn diffuse_batch<T: Scalar>(
    x0: &Tensor<T>,
    t: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let eps = Tensor::<T>::randn(x0.shape(), rng);
    let x_t = forward_diffuse(x0, t, &eps)?;
    Ok((x_t, eps))
}
