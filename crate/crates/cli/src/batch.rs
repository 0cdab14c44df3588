//! Batch assembly: stacking sequence samples into model tensors.

use anyhow::{bail, Result};
use lidarseq_net::ConditionBatch;
use lidarseq_scene::SequenceSample;
use lidarseq_tensor::Tensor;

/// Stack samples into `x0 [B, F, 2, H, W]` plus the aligned conditions.
pub fn stack_samples(samples: &[&SequenceSample]) -> Result<(Tensor<f32>, ConditionBatch<f32>)> {
    if samples.is_empty() {
        bail!("empty batch");
    }
    let f = samples[0].num_frames();
    let (h, w) = samples[0].frames[0].size();
    let frame_len = 2 * h * w;
    let b = samples.len();
    let mut x0 = Vec::with_capacity(b * f * frame_len);
    let mut sketch = Vec::with_capacity(b * f * frame_len);
    let mut prior = Vec::with_capacity(b * f * frame_len);
    let mut captions = Vec::with_capacity(b);
    for s in samples {
        if s.num_frames() != f || s.frames[0].size() != (h, w) {
            bail!("inconsistent sample shapes in batch");
        }
        for k in 0..f {
            x0.extend_from_slice(&s.frames[k].channels().to_vec());
            sketch.extend_from_slice(&s.sketches[k].to_vec());
            prior.extend_from_slice(&s.priors[k].to_vec());
        }
        captions.push(s.caption.clone());
    }
    let shape = [b, f, 2, h, w];
    Ok((
        Tensor::from_vec(&shape, x0)?,
        ConditionBatch {
            sketch: Tensor::from_vec(&shape, sketch)?,
            prior: Tensor::from_vec(&shape, prior)?,
            captions,
        },
    ))
}
