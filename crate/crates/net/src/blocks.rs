//! The blended spatial/temporal conv block and the resolution transitions.

use crate::config::ModelConfig;
use crate::embed::fourier_features;
use crate::params::ParamStore;
use crate::Result;
use lidarseq_tensor::{Scalar, Tensor};

pub(crate) struct Conv2d<T: Scalar> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
    pub stride: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, o: usize, c: usize, k: usize, stride: usize) -> Self {
        Conv2d {
            w: ps.conv(&format!("{}.w", name), &[o, c, k, k]),
            b: ps.zeros(&format!("{}.b", name), &[o]),
            stride,
        }
    }

    pub fn new_zero(ps: &mut ParamStore<T>, name: &str, o: usize, c: usize, k: usize) -> Self {
        Conv2d {
            w: ps.zeros(&format!("{}.w", name), &[o, c, k, k]),
            b: ps.zeros(&format!("{}.b", name), &[o]),
            stride: 1,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.conv2d_circular(&self.w, &self.b, self.stride)?)
    }
}

pub(crate) struct Linear<T: Scalar> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, o: usize, i: usize) -> Self {
        Linear { w: ps.linear(&format!("{}.w", name), &[o, i]), b: ps.zeros(&format!("{}.b", name), &[o]) }
    }

    pub fn new_zero(ps: &mut ParamStore<T>, name: &str, o: usize, i: usize) -> Self {
        Linear { w: ps.zeros(&format!("{}.w", name), &[o, i]), b: ps.zeros(&format!("{}.b", name), &[o]) }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.linear(&self.w, &self.b)?)
    }
}

pub(crate) struct GroupNorm<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub groups: usize,
}

impl<T: Scalar> GroupNorm<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, c: usize) -> Self {
        GroupNorm {
            gamma: ps.constant(&format!("{}.g", name), &[c], 1.0),
            beta: ps.zeros(&format!("{}.b", name), &[c]),
            groups: ModelConfig::gn_groups(c),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.group_norm(self.groups, &self.gamma, &self.beta)?)
    }
}

/// One blended block. The spatial path is a residual conv stack over frames
/// folded into the batch (GN -> SiLU -> concat Fourier features -> conv ->
/// GN -> timestep scale/shift -> SiLU -> zero-init conv, plus the skip); the
/// temporal path is a residual (3,1,1) conv; a per-block learnable alpha
/// (stored pre-sigmoid, initialized at 0.5) blends them:
/// `y = alpha * x_spatial + (1 - alpha) * x_temporal`.
pub struct SpatioTemporalBlock<T: Scalar> {
    norm1: GroupNorm<T>,
    conv1: Conv2d<T>,
    norm2: GroupNorm<T>,
    t_proj: Linear<T>,
    conv2: Conv2d<T>,
    temporal_w: Tensor<T>,
    temporal_b: Tensor<T>,
    alpha_raw: Tensor<T>,
    fourier: Tensor<T>,
    channels: usize,
}

impl<T: Scalar> SpatioTemporalBlock<T> {
    pub fn new(
        ps: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        h: usize,
        w: usize,
        cfg: &ModelConfig,
    ) -> Self {
        let fk = cfg.fourier_k;
        SpatioTemporalBlock {
            norm1: GroupNorm::new(ps, &format!("{}.norm1", name), channels),
            conv1: Conv2d::new(ps, &format!("{}.conv1", name), channels, channels + 4 * fk, 3, 1),
            norm2: GroupNorm::new(ps, &format!("{}.norm2", name), channels),
            t_proj: Linear::new(ps, &format!("{}.temb", name), 2 * channels, cfg.t_emb_dim),
            conv2: Conv2d::new_zero(ps, &format!("{}.conv2", name), channels, channels, 3),
            temporal_w: ps.zeros(&format!("{}.tconv.w", name), &[channels, channels, 3, 1, 1]),
            temporal_b: ps.zeros(&format!("{}.tconv.b", name), &[channels]),
            alpha_raw: ps.zeros(&format!("{}.alpha", name), &[]),
            fourier: fourier_features::<T>(h, w, fk),
            channels,
        }
    }

    /// `x` is `[B*F, C, h, w]`; `t_emb` is `[B, t_emb_dim]`.
    pub fn forward(&self, x: &Tensor<T>, t_emb: &Tensor<T>, frames: usize) -> Result<Tensor<T>> {
        let shape = x.shape().to_vec();
        let (bf, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        debug_assert_eq!(c, self.channels);

        // spatial path, frames stay folded in the batch axis
        let mut hs = self.norm1.forward(x)?.silu();
        let fourier = self.fourier.broadcast0(bf)?;
        hs = Tensor::concat(1, &[&hs, &fourier])?;
        hs = self.conv1.forward(&hs)?;
        hs = self.norm2.forward(&hs)?;
        let mod_params = self.t_proj.forward(&t_emb.silu())?; // [B, 2C]
        let mod_params = mod_params.repeat_interleave0(frames)?; // [B*F, 2C]
        let scale = mod_params.narrow(1, 0, c)?;
        let shift = mod_params.narrow(1, c, c)?;
        hs = hs.channel_affine(&scale, &shift)?;
        hs = self.conv2.forward(&hs.silu())?;
        let x_spatial = x.add(&hs)?;

        // temporal path over [B, C, F, h, w]
        let b = bf / frames;
        let xt = x
            .reshape(&[b, frames, c, h, w])?
            .permute(&[0, 2, 1, 3, 4])?
            .conv3d_temporal(&self.temporal_w, &self.temporal_b)?
            .permute(&[0, 2, 1, 3, 4])?
            .reshape(&[bf, c, h, w])?;
        let x_temporal = x.add(&xt)?;

        // y = alpha * x_S + (1 - alpha) * x_T, written so that alpha = 1.0
        // reproduces the spatial path bit-exactly (1*x + 0*y adds a true 0)
        let alpha = self.alpha_raw.sigmoid();
        let one_minus = alpha.neg().add_scalar(1.0);
        let blended = x_spatial
            .mul_scalar_tensor(&alpha)?
            .add(&x_temporal.mul_scalar_tensor(&one_minus)?)?;
        Ok(blended)
    }
}
