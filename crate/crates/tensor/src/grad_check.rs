//! Finite-difference gradient checking, float64 only.

use crate::tensor::contract_err;
use crate::{Result, Tensor, TensorError};

/// Compare the reverse-mode gradient of `f` at `x` against central
/// differences with the given step.
///
/// Returns the maximum over coordinates of `|analytic - numeric| /
/// max(1, |analytic|)`. Coordinates where the one-sided differences disagree
/// badly (a kink at the probe point, e.g. a `max`) are skipped: central
/// differences say nothing useful there.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    if step <= 0.0 {
        return contract_err("grad_check", "step must be positive");
    }
    let base = x.to_vec();
    let shape = x.shape().to_vec();

    let leaf = Tensor::from_vec(&shape, base.clone())?.trainable();
    let loss = f(&leaf)?;
    if loss.len() != 1 {
        return contract_err("grad_check", format!("f returned shape {:?}", loss.shape()));
    }
    let f0 = loss.item()?;
    if !f0.is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check", msg: format!("f(x) = {}", f0) });
    }
    loss.backward()?;
    let analytic = leaf
        .grad()
        .ok_or(TensorError::Contract { op: "grad_check", msg: "no gradient reached x".into() })?;

    let eval = |data: Vec<f64>| -> Result<f64> {
        let t = Tensor::from_vec(&shape, data)?;
        let y = f(&t)?;
        let v = y.item()?;
        if !v.is_finite() {
            return Err(TensorError::NonFinite { op: "grad_check", msg: format!("f(x±h) = {}", v) });
        }
        Ok(v)
    };

    let mut max_rel = 0.0f64;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += step;
        let mut minus = base.clone();
        minus[i] -= step;
        let fp = eval(plus)?;
        let fm = eval(minus)?;
        let central = (fp - fm) / (2.0 * step);
        let fwd = (fp - f0) / step;
        let bwd = (f0 - fm) / step;
        // Two-sided disagreement flags a non-differentiable point.
        if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()).max(1.0) {
            continue;
        }
        let rel = (analytic[i] - central).abs() / analytic[i].abs().max(1.0);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
