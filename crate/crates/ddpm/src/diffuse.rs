//! Forward corruption, epsilon inversion and the reverse posterior step.

use crate::schedule::{schedule_at, transition_params};
use crate::{DdpmError, Result};
use lidarseq_tensor::{Scalar, Tensor};

fn same_shape<T: Scalar>(what: &str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DdpmError::Tensor(lidarseq_tensor::TensorError::Dim {
            op: "ddpm",
            msg: format!("{}: {:?} vs {:?}", what, a.shape(), b.shape()),
        }));
    }
    Ok(())
}

/// `x_t = alpha_t x + sigma_t eps`.
pub fn forward_diffuse<T: Scalar>(x: &Tensor<T>, t: f64, eps: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("x vs eps", x, eps)?;
    let (alpha, sigma) = schedule_at(t)?;
    Ok(x.scale(alpha).add(&eps.scale(sigma))?)
}

/// Recover the clean-sample estimate from an epsilon estimate:
/// `xhat = (x_t - sigma_t epshat) / max(alpha_t, t_floor)`.
///
/// The clamp handles the `t -> 1` singularity where `alpha_t -> 0`; with the
/// true epsilon and `alpha_t >= t_floor` the inversion is exact.
pub fn eps_to_x<T: Scalar>(
    x_t: &Tensor<T>,
    eps_hat: &Tensor<T>,
    t: f64,
    t_floor: f64,
) -> Result<Tensor<T>> {
    same_shape("x_t vs eps_hat", x_t, eps_hat)?;
    if t_floor <= 0.0 {
        return Err(DdpmError::Contract(format!("t_floor = {} must be positive", t_floor)));
    }
    let (alpha, sigma) = schedule_at(t)?;
    let denom = alpha.max(t_floor);
    Ok(x_t.sub(&eps_hat.scale(sigma))?.scale(1.0 / denom))
}

/// One reverse step `p(x_s | x_t)`: returns `mu + Sigma * noise` with
/// `mu = (alpha_{t|s} sigma_s^2 / sigma_t^2) x_t
///     + (alpha_s sigma^2_{t|s} / sigma_t^2) xhat`
/// and `Sigma^2 = sigma^2_{t|s} sigma_s^2 / sigma_t^2`. At `s = 0` the
/// coefficients collapse so the step returns `xhat` exactly with zero
/// variance.
pub fn posterior_step<T: Scalar>(
    x_t: &Tensor<T>,
    x_hat: &Tensor<T>,
    s: f64,
    t: f64,
    noise: &Tensor<T>,
) -> Result<Tensor<T>> {
    same_shape("x_t vs x_hat", x_t, x_hat)?;
    same_shape("x_t vs noise", x_t, noise)?;
    let (alpha_s, sigma_s) = schedule_at(s)?;
    let (_, sigma_t) = schedule_at(t)?;
    if sigma_t <= 0.0 {
        return Err(DdpmError::Ordering { s, t });
    }
    let (alpha_ts, sigma2_ts) = transition_params(s, t)?;
    let sigma_t2 = sigma_t * sigma_t;
    let c_xt = alpha_ts * sigma_s * sigma_s / sigma_t2;
    let c_xhat = alpha_s * sigma2_ts / sigma_t2;
    let std = (sigma2_ts * sigma_s * sigma_s / sigma_t2).max(0.0).sqrt();
    x_t.scale(c_xt)
        .add(&x_hat.scale(c_xhat))?
        .add(&noise.scale(std))
        .map_err(DdpmError::from)
}
