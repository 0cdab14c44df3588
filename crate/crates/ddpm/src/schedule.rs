//! The alpha-cosine schedule and its transition coefficients.

use crate::{DdpmError, Result};
use std::f64::consts::FRAC_PI_2;

/// `(alpha_t, sigma_t) = (cos(pi t / 2), sin(pi t / 2))`, the variance-
/// preserving pair with `alpha^2 + sigma^2 = 1`.
pub fn schedule_at(t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(DdpmError::TimeRange(t));
    }
    Ok(((FRAC_PI_2 * t).cos(), (FRAC_PI_2 * t).sin()))
}

/// Coefficients of the intermediate transition from timestep `s` to `t`:
/// `alpha_{t|s} = alpha_t / alpha_s` and
/// `sigma^2_{t|s} = sigma_t^2 - alpha_{t|s}^2 sigma_s^2`.
///
/// They satisfy `alpha_{t|s} alpha_s = alpha_t` and
/// `alpha_{t|s}^2 sigma_s^2 + sigma^2_{t|s} = sigma_t^2` by construction.
pub fn transition_params(s: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s >= t {
        return Err(DdpmError::Ordering { s, t });
    }
    let (alpha_s, sigma_s) = schedule_at(s)?;
    let (alpha_t, sigma_t) = schedule_at(t)?;
    let alpha_ts = alpha_t / alpha_s;
    let sigma2_ts = sigma_t * sigma_t - alpha_ts * alpha_ts * sigma_s * sigma_s;
    Ok((alpha_ts, sigma2_ts.max(0.0)))
}
