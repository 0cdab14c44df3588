//! Logarithmic range scaling.
//!
//! `dhat = log(d + 1) / log(d_max + 1)` mapped affinely onto [-1, 1]. The
//! map is a strictly increasing bijection of [0, d_max]; both directions run
//! in f64 so that an f32 channel value survives a round trip bit-exactly.

use crate::{CodecError, Result};

pub fn scale_range(d: f64, d_max: f64) -> Result<f64> {
    if !(d_max > 0.0) {
        return Err(CodecError::Config(format!("d_max = {} must be positive", d_max)));
    }
    if !(0.0..=d_max).contains(&d) {
        return Err(CodecError::Range(format!("d = {} outside [0, {}]; clip first", d, d_max)));
    }
    let dhat = (d + 1.0).ln() / (d_max + 1.0).ln();
    Ok(2.0 * dhat - 1.0)
}

/// Inverse of [`scale_range`]; clamps the last-ulp overshoot at d_max.
pub fn unscale_range(v: f64, d_max: f64) -> Result<f64> {
    if !(d_max > 0.0) {
        return Err(CodecError::Config(format!("d_max = {} must be positive", d_max)));
    }
    if !(-1.0..=1.0).contains(&v) {
        return Err(CodecError::Range(format!("normalized value {} outside [-1, 1]", v)));
    }
    let dhat = (v + 1.0) / 2.0;
    let d = (dhat * (d_max + 1.0).ln()).exp() - 1.0;
    Ok(d.clamp(0.0, d_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(scale_range(0.0, 80.0).unwrap(), -1.0);
        assert_eq!(scale_range(80.0, 80.0).unwrap(), 1.0);
    }

    #[test]
    fn log9_over_log81_is_half() {
        // log(9)/log(81) = 1/2, so d = 8 at d_max = 80 lands on 0
        let v = scale_range(8.0, 80.0).unwrap();
        assert!(v.abs() < 1e-12, "{}", v);
    }

    #[test]
    fn out_of_range_is_an_error() {
        assert!(scale_range(-0.1, 80.0).is_err());
        assert!(scale_range(80.1, 80.0).is_err());
        assert!(unscale_range(1.1, 80.0).is_err());
    }

    #[test]
    fn strictly_increasing() {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let d = 80.0 * k as f64 / 1000.0;
            let v = scale_range(d, 80.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }
}
