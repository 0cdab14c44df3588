//! The full encoder/bottleneck/decoder assembly with the three condition
//! injection paths.

use crate::attn::{CaptionCrossAttention, FactorizedSpaceTime};
use crate::blocks::{Conv2d, GroupNorm, Linear, SpatioTemporalBlock};
use crate::config::ModelConfig;
use crate::embed::timestep_embedding;
use crate::params::ParamStore;
use crate::{NetError, Result};
use lidarseq_tensor::{Scalar, Tensor};

/// Conditions for one batch, aligned with the noised input.
#[derive(Debug, Clone)]
pub struct ConditionBatch<T: Scalar> {
    /// `[B, F, 2, H, W]` road sketch (binary channels).
    pub sketch: Tensor<T>,
    /// `[B, F, 2, H, W]` object prior image.
    pub prior: Tensor<T>,
    /// One token sequence per batch element.
    pub captions: Vec<Vec<u32>>,
}

/// Channel-concatenate the noised sequence with its pixel-aligned sketch:
/// `[B,F,2,H,W] + [B,F,2,H,W] -> [B,F,4,H,W]`, noised channels first.
pub fn inject_sketch<T: Scalar>(x: &Tensor<T>, sketch: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != sketch.shape() {
        return Err(NetError::Shape(format!(
            "sketch {:?} does not align with input {:?}",
            sketch.shape(),
            x.shape()
        )));
    }
    Ok(Tensor::concat(2, &[x, sketch])?)
}

struct EncoderColumn<T: Scalar> {
    blocks: Vec<Vec<SpatioTemporalBlock<T>>>,
    downs: Vec<Conv2d<T>>,
}

impl<T: Scalar> EncoderColumn<T> {
    fn new(
        ps: &mut ParamStore<T>,
        prefix: &str,
        cfg: &ModelConfig,
        h: usize,
        w: usize,
    ) -> Self {
        let mut blocks = Vec::new();
        let mut downs = Vec::new();
        for s in 0..cfg.scales {
            let c = cfg.width(s);
            let (hs, ws) = (h >> s, w >> s);
            let mut row = Vec::new();
            for bidx in 0..cfg.blocks_per_scale {
                row.push(SpatioTemporalBlock::new(
                    ps,
                    &format!("{}.s{}.b{}", prefix, s, bidx),
                    c,
                    hs,
                    ws,
                    cfg,
                ));
            }
            blocks.push(row);
            if s + 1 < cfg.scales {
                downs.push(Conv2d::new(
                    ps,
                    &format!("{}.down{}", prefix, s),
                    cfg.width(s + 1),
                    c,
                    3,
                    2,
                ));
            }
        }
        EncoderColumn { blocks, downs }
    }

    /// Returns the per-scale outputs (pre-downsample) plus the deepest map.
    fn forward(
        &self,
        mut h: Tensor<T>,
        t_emb: &Tensor<T>,
        frames: usize,
    ) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let mut skips = Vec::with_capacity(self.blocks.len());
        for (s, row) in self.blocks.iter().enumerate() {
            for block in row {
                h = block.forward(&h, t_emb, frames)?;
            }
            skips.push(h.clone());
            if s < self.downs.len() {
                h = self.downs[s].forward(&h)?;
            }
        }
        Ok((skips, h))
    }
}

/// The sequential noise predictor.
pub struct SeqUNet<T: Scalar> {
    cfg: ModelConfig,
    ps: ParamStore<T>,
    in_conv: Conv2d<T>,
    encoder: EncoderColumn<T>,
    ctrl_in_conv: Conv2d<T>,
    ctrl_encoder: EncoderColumn<T>,
    ctrl_proj: Vec<Conv2d<T>>,
    bot_a: SpatioTemporalBlock<T>,
    bot_attn: FactorizedSpaceTime<T>,
    bot_caption: CaptionCrossAttention<T>,
    bot_b: SpatioTemporalBlock<T>,
    tmlp1: Linear<T>,
    tmlp2: Linear<T>,
    fuses: Vec<Conv2d<T>>,
    dec_blocks: Vec<Vec<SpatioTemporalBlock<T>>>,
    ups: Vec<Conv2d<T>>,
    out_norm: GroupNorm<T>,
    out_conv: Conv2d<T>,
    h: usize,
    w: usize,
}

impl<T: Scalar> SeqUNet<T> {
    /// Build with deterministic initialization for an `h x w` sensor grid.
    pub fn new(cfg: &ModelConfig, h: usize, w: usize, init_seed: u64) -> Result<Self> {
        cfg.validate()?;
        cfg.check_resolution(h, w)?;
        let mut ps = ParamStore::new(init_seed);
        let c0 = cfg.width(0);
        let deep = cfg.width(cfg.scales - 1);
        let (dh, dw) = (h >> (cfg.scales - 1), w >> (cfg.scales - 1));

        let tmlp1 = Linear::new(&mut ps, "tmlp.l1", cfg.t_emb_dim, cfg.t_emb_dim);
        let tmlp2 = Linear::new(&mut ps, "tmlp.l2", cfg.t_emb_dim, cfg.t_emb_dim);
        let in_conv = Conv2d::new(&mut ps, "in", c0, 4, 3, 1);
        let encoder = EncoderColumn::new(&mut ps, "enc", cfg, h, w);
        let ctrl_in_conv = Conv2d::new(&mut ps, "ctrl.in", c0, 4, 3, 1);
        let ctrl_encoder = EncoderColumn::new(&mut ps, "ctrl", cfg, h, w);
        let mut ctrl_proj = Vec::new();
        for s in 0..cfg.scales {
            ctrl_proj.push(Conv2d::new_zero(
                &mut ps,
                &format!("ctrl.proj{}", s),
                cfg.width(s),
                cfg.width(s),
                1,
            ));
        }
        let bot_a = SpatioTemporalBlock::new(&mut ps, "bot.a", deep, dh, dw, cfg);
        let bot_attn = FactorizedSpaceTime::new(&mut ps, "bot.attn", deep, cfg);
        let bot_caption = CaptionCrossAttention::new(&mut ps, "bot.caption", deep, cfg);
        let bot_b = SpatioTemporalBlock::new(&mut ps, "bot.b", deep, dh, dw, cfg);

        let mut fuses = Vec::new();
        let mut dec_blocks = Vec::new();
        let mut ups = Vec::new();
        for s in (0..cfg.scales).rev() {
            let c = cfg.width(s);
            let (hs, ws) = (h >> s, w >> s);
            fuses.push(Conv2d::new(&mut ps, &format!("dec.fuse{}", s), c, 2 * c, 3, 1));
            let mut row = Vec::new();
            for bidx in 0..cfg.blocks_per_scale {
                row.push(SpatioTemporalBlock::new(
                    &mut ps,
                    &format!("dec.s{}.b{}", s, bidx),
                    c,
                    hs,
                    ws,
                    cfg,
                ));
            }
            dec_blocks.push(row);
            if s > 0 {
                ups.push(Conv2d::new(&mut ps, &format!("dec.up{}", s), cfg.width(s - 1), c, 3, 1));
            }
        }
        let out_norm = GroupNorm::new(&mut ps, "out.norm", c0);
        let out_conv = Conv2d::new_zero(&mut ps, "out.conv", 2, c0, 3);

        Ok(SeqUNet {
            cfg: cfg.clone(),
            ps,
            in_conv,
            encoder,
            ctrl_in_conv,
            ctrl_encoder,
            ctrl_proj,
            bot_a,
            bot_attn,
            bot_caption,
            bot_b,
            tmlp1,
            tmlp2,
            fuses,
            dec_blocks,
            ups,
            out_norm,
            out_conv,
            h,
            w,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.ps
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    fn check_input(&self, x: &Tensor<T>, t: &[f64], cond: &ConditionBatch<T>) -> Result<(usize, usize)> {
        let s = x.shape();
        if s.len() != 5 || s[2] != 2 || s[3] != self.h || s[4] != self.w {
            return Err(NetError::Shape(format!(
                "input {:?}, expected [B, F, 2, {}, {}]",
                s, self.h, self.w
            )));
        }
        let (b, f) = (s[0], s[1]);
        if t.len() != b {
            return Err(NetError::Shape(format!("{} times for batch of {}", t.len(), b)));
        }
        if cond.sketch.shape() != s || cond.prior.shape() != s {
            return Err(NetError::Shape(format!(
                "conditions {:?}/{:?} do not match input {:?}",
                cond.sketch.shape(),
                cond.prior.shape(),
                s
            )));
        }
        if cond.captions.len() != b {
            return Err(NetError::Shape(format!(
                "{} captions for batch of {}",
                cond.captions.len(),
                b
            )));
        }
        Ok((b, f))
    }

    /// Predict the per-frame noise for a noised sequence under conditions.
    pub fn forward(
        &self,
        x_seq: &Tensor<T>,
        t: &[f64],
        cond: &ConditionBatch<T>,
    ) -> Result<Tensor<T>> {
        let (b, f) = self.check_input(x_seq, t, cond)?;
        let t_emb = self.time_embedding(t)?;

        // sketch: channel concatenation, then fold frames into the batch
        let x_in = inject_sketch(x_seq, &cond.sketch)?;
        let h0 = x_in.reshape(&[b * f, 4, self.h, self.w])?;
        let h0 = self.in_conv.forward(&h0)?;
        let (mut skips, mut hmap) = self.encoder.forward(h0, &t_emb, f)?;

        // control branch: noised input + prior, zero-projected residuals
        let ctrl_in = Tensor::concat(2, &[x_seq, &cond.prior])?
            .reshape(&[b * f, 4, self.h, self.w])?;
        let ctrl0 = self.ctrl_in_conv.forward(&ctrl_in)?;
        let (ctrl_skips, _) = self.ctrl_encoder.forward(ctrl0, &t_emb, f)?;
        for (s, skip) in skips.iter_mut().enumerate() {
            let residual = self.ctrl_proj[s].forward(&ctrl_skips[s])?;
            *skip = skip.add(&residual)?;
        }

        // bottleneck
        hmap = self.bot_a.forward(&hmap, &t_emb, f)?;
        hmap = self.bot_attn.forward(&hmap, f)?;
        hmap = self.bot_caption.forward(&hmap, &cond.captions, &t_emb, f)?;
        hmap = self.bot_b.forward(&hmap, &t_emb, f)?;

        // decoder with skip fusion
        for (row, s) in (0..self.cfg.scales).rev().enumerate() {
            let fused = Tensor::concat(1, &[&hmap, &skips[s]])?;
            hmap = self.fuses[row].forward(&fused)?;
            for block in &self.dec_blocks[row] {
                hmap = block.forward(&hmap, &t_emb, f)?;
            }
            if s > 0 {
                hmap = hmap.upsample_nearest2x()?;
                hmap = self.ups[row].forward(&hmap)?;
            }
        }

        let out = self.out_conv.forward(&self.out_norm.forward(&hmap)?.silu())?;
        Ok(out.reshape(&[b, f, 2, self.h, self.w])?)
    }

    fn time_embedding(&self, t: &[f64]) -> Result<Tensor<T>> {
        let emb = timestep_embedding::<T>(t, self.cfg.t_emb_dim);
        // 2-layer MLP over the sinusoidal bands
        let h = self.tmlp1.forward(&emb)?.silu();
        self.tmlp2.forward(&h)
    }
}
