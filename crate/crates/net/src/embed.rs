//! Positional encodings: the timestep embedding and the per-pixel Fourier
//! coordinate features.

use lidarseq_tensor::{Scalar, Tensor};

/// Sinusoidal embedding of diffusion times (one row per batch element).
/// Times in [0, 1] are stretched by 1000 before the standard log-spaced
/// sin/cos bands.
pub fn timestep_embedding<T: Scalar>(times: &[f64], dim: usize) -> Tensor<T> {
    assert!(dim % 2 == 0, "embedding dim must be even");
    let half = dim / 2;
    let mut data = Vec::with_capacity(times.len() * dim);
    for &t in times {
        let tt = t * 1000.0;
        for i in 0..half {
            let freq = (-(10_000f64.ln()) * i as f64 / (half.max(2) - 1) as f64).exp();
            data.push(T::from_f64((tt * freq).sin()));
        }
        for i in 0..half {
            let freq = (-(10_000f64.ln()) * i as f64 / (half.max(2) - 1) as f64).exp();
            data.push(T::from_f64((tt * freq).cos()));
        }
    }
    Tensor::from_vec(&[times.len(), dim], data).expect("shape matches data")
}

/// Per-pixel Fourier features of the equirectangular coordinates, shape
/// `[4K, H, W]` with channel layout
/// `[sin(2^k pi theta)]_k, [cos(2^k pi theta)]_k, [sin(2^k pi phi)]_k,
/// [cos(2^k pi phi)]_k`.
///
/// Coordinates are normalized over bin left edges: `theta(j) = -1 + 2j/W`
/// (so the wrap at +-1 is seamless for every band) and `phi(i) = 1 - 2i/H`
/// (row 0 at the top of the elevation sweep).
pub fn fourier_features<T: Scalar>(h: usize, w: usize, k: usize) -> Tensor<T> {
    let mut data = Vec::with_capacity(4 * k * h * w);
    let theta = |j: usize| -1.0 + 2.0 * j as f64 / w as f64;
    let phi = |i: usize| 1.0 - 2.0 * i as f64 / h as f64;
    for (coord, trig) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        for band in 0..k {
            let scale = (1u64 << band) as f64 * std::f64::consts::PI;
            for i in 0..h {
                for j in 0..w {
                    let u = if coord == 0 { theta(j) } else { phi(i) };
                    let v = if trig == 0 { (scale * u).sin() } else { (scale * u).cos() };
                    data.push(T::from_f64(v));
                }
            }
        }
    }
    Tensor::from_vec(&[4 * k, h, w], data).expect("shape matches data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_column_has_zero_sines_and_unit_cosines() {
        let k = 3;
        let (h, w) = (4usize, 8usize);
        let f: Tensor<f64> = fourier_features(h, w, k);
        let d = f.to_vec();
        let j_center = w / 2; // theta = 0 exactly
        for band in 0..k {
            for i in 0..h {
                let sin_v = d[(band * h + i) * w + j_center];
                let cos_v = d[((k + band) * h + i) * w + j_center];
                assert_eq!(sin_v, 0.0);
                assert_eq!(cos_v, 1.0);
            }
        }
    }

    #[test]
    fn base_band_wraps_seamlessly() {
        let k = 1;
        let (h, w) = (2usize, 8usize);
        let f: Tensor<f64> = fourier_features(h, w, k);
        let d = f.to_vec();
        // sin(pi * theta): left edge theta = -1 gives sin(-pi) ~ 0, matching
        // the wrapped right side
        for i in 0..h {
            assert!(d[i * w].abs() < 1e-12);
        }
    }

    #[test]
    fn full_map_matches_scalar_loop_oracle() {
        let (h, w, k) = (3usize, 16usize, 4usize);
        let f: Tensor<f64> = fourier_features(h, w, k);
        let d = f.to_vec();
        for band in 0..k {
            for i in 0..h {
                for j in 0..w {
                    let theta = -1.0 + 2.0 * j as f64 / w as f64;
                    let phi = 1.0 - 2.0 * i as f64 / h as f64;
                    let s = (1u64 << band) as f64 * std::f64::consts::PI;
                    let idx = |c: usize| ((c * k + band) * h + i) * w + j;
                    assert!((d[idx(0)] - (s * theta).sin()).abs() < 1e-7);
                    assert!((d[idx(1)] - (s * theta).cos()).abs() < 1e-7);
                    assert!((d[idx(2)] - (s * phi).sin()).abs() < 1e-7);
                    assert!((d[idx(3)] - (s * phi).cos()).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn timestep_embedding_is_deterministic_and_sized() {
        let e: Tensor<f32> = timestep_embedding(&[0.25, 0.75], 128);
        assert_eq!(e.shape(), &[2, 128]);
        let e2: Tensor<f32> = timestep_embedding(&[0.25, 0.75], 128);
        assert_eq!(e.to_vec(), e2.to_vec());
    }
}
