//! The desk-scale feature extractor: a fixed-seed random convolutional
//! encoder over equirectangular frames, pooled into 192 dimensions, plus an
//! order-sensitive clip variant.

use crate::Result;
use lidarseq_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const CHANNELS: [usize; 3] = [16, 32, 48];

/// Deterministic random-weight encoder. Frame features are 48 channels
/// pooled over 4 spatial quadrants (D = 192); clip features combine frame
/// features with fixed per-position weights, so frame order matters.
pub struct FeatureExtractor {
    convs: Vec<(Tensor<f32>, Tensor<f32>)>,
    clip_weights: Vec<f32>,
    pub seed: u64,
}

pub const FEATURE_DIM: usize = 192;
const MAX_CLIP: usize = 16;

impl FeatureExtractor {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut convs = Vec::new();
        let mut c_in = 2usize;
        for &c_out in &CHANNELS {
            let std = (2.0 / (c_in as f64 * 9.0)).sqrt();
            let w: Vec<f32> = (0..c_out * c_in * 9)
                .map(|_| (rng.sample::<f64, _>(rand_distr::StandardNormal) * std) as f32)
                .collect();
            let b: Vec<f32> = (0..c_out)
                .map(|_| (rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.1) as f32)
                .collect();
            convs.push((
                Tensor::from_vec(&[c_out, c_in, 3, 3], w).expect("shape matches"),
                Tensor::from_vec(&[c_out], b).expect("shape matches"),
            ));
            c_in = c_out;
        }
        // distinct, nonuniform frame weights make clip features order-aware
        let clip_weights: Vec<f32> = (0..MAX_CLIP)
            .map(|_| 1.0 + (rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.5) as f32)
            .collect();
        FeatureExtractor { convs, clip_weights, seed }
    }

    /// Feature vector of one `[2, H, W]` frame tensor. H and W must be
    /// divisible by 8 (three stride-2 stages) and the pooled map at least
    /// 2 x 2 for quadrant pooling.
    pub fn frame_features(&self, frame: &Tensor<f32>) -> Result<Vec<f64>> {
        let s = frame.shape();
        let x = frame.reshape(&[1, s[0], s[1], s[2]])?;
        let mut h = x;
        for (w, b) in &self.convs {
            h = h.conv2d_circular(w, b, 2)?.relu();
        }
        let hs = h.shape().to_vec();
        let (c, fh, fw) = (hs[1], hs[2], hs[3]);
        let d = h.to_vec();
        let mut out = vec![0.0f64; 4 * c];
        let (mh, mw) = (fh.div_ceil(2), fw.div_ceil(2));
        for ci in 0..c {
            for i in 0..fh {
                for j in 0..fw {
                    let quadrant = (i / mh).min(1) * 2 + (j / mw).min(1);
                    out[quadrant * c + ci] += f64::from(d[(ci * fh + i) * fw + j]);
                }
            }
        }
        // mean within each quadrant
        let per_quadrant = (fh * fw) as f64 / 4.0;
        out.iter_mut().for_each(|v| *v /= per_quadrant);
        Ok(out)
    }

    /// Order-sensitive feature of a short clip (first `min(F, cap)` frames):
    /// a fixed-weight combination of the per-frame features.
    pub fn clip_features(&self, frames: &[Tensor<f32>]) -> Result<Vec<f64>> {
        let mut out = vec![0.0f64; FEATURE_DIM];
        for (k, frame) in frames.iter().take(MAX_CLIP).enumerate() {
            let f = self.frame_features(frame)?;
            let w = f64::from(self.clip_weights[k]);
            for (o, v) in out.iter_mut().zip(&f) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}
