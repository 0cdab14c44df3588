//! Bottleneck attention: factorized space/time self-attention and caption
//! cross-attention fused with the timestep embedding.

use crate::blocks::{GroupNorm, Linear};
use crate::config::ModelConfig;
use crate::params::ParamStore;
use crate::{NetError, Result};
use lidarseq_tensor::{attention, Scalar, Tensor};

/// Split `[N, L, C]` into `heads` and run scaled dot-product attention.
fn multi_head<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
) -> Result<Tensor<T>> {
    let (n, lq, c) = (q.shape()[0], q.shape()[1], q.shape()[2]);
    let lk = k.shape()[1];
    if c % heads != 0 {
        return Err(NetError::Config(format!("{} channels not divisible by {} heads", c, heads)));
    }
    let d = c / heads;
    let split = |t: &Tensor<T>, l: usize| -> Result<Tensor<T>> {
        Ok(t.reshape(&[n, l, heads, d])?.permute(&[0, 2, 1, 3])?.reshape(&[n * heads, l, d])?)
    };
    let out = attention(&split(q, lq)?, &split(k, lk)?, &split(v, lk)?)?;
    Ok(out
        .reshape(&[n, heads, lq, d])?
        .permute(&[0, 2, 1, 3])?
        .reshape(&[n, lq, c])?)
}

/// Spatial attention within each frame (frames stacked along the batch),
/// then temporal attention across frames at each pixel position, both with
/// residual connections and zero-initialized output projections.
pub struct FactorizedSpaceTime<T: Scalar> {
    norm_s: GroupNorm<T>,
    qs: Linear<T>,
    ks: Linear<T>,
    vs: Linear<T>,
    out_s: Linear<T>,
    norm_t: GroupNorm<T>,
    qt: Linear<T>,
    kt: Linear<T>,
    vt: Linear<T>,
    out_t: Linear<T>,
    heads: usize,
}

impl<T: Scalar> FactorizedSpaceTime<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, c: usize, cfg: &ModelConfig) -> Self {
        FactorizedSpaceTime {
            norm_s: GroupNorm::new(ps, &format!("{}.snorm", name), c),
            qs: Linear::new(ps, &format!("{}.sq", name), c, c),
            ks: Linear::new(ps, &format!("{}.sk", name), c, c),
            vs: Linear::new(ps, &format!("{}.sv", name), c, c),
            out_s: Linear::new_zero(ps, &format!("{}.sout", name), c, c),
            norm_t: GroupNorm::new(ps, &format!("{}.tnorm", name), c),
            qt: Linear::new(ps, &format!("{}.tq", name), c, c),
            kt: Linear::new(ps, &format!("{}.tk", name), c, c),
            vt: Linear::new(ps, &format!("{}.tv", name), c, c),
            out_t: Linear::new_zero(ps, &format!("{}.tout", name), c, c),
            heads: cfg.heads,
        }
    }

    /// `x` is `[B*F, C, h, w]`.
    pub fn forward(&self, x: &Tensor<T>, frames: usize) -> Result<Tensor<T>> {
        let shape = x.shape().to_vec();
        let (bf, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let b = bf / frames;
        let hw = h * w;

        // spatial: tokens are pixels, frames ride in the batch axis
        let n = self.norm_s.forward(x)?;
        let tokens = n.reshape(&[bf, c, hw])?.permute(&[0, 2, 1])?; // [B*F, hw, C]
        let att = multi_head(
            &self.qs.forward(&tokens)?,
            &self.ks.forward(&tokens)?,
            &self.vs.forward(&tokens)?,
            self.heads,
        )?;
        let att = self.out_s.forward(&att)?;
        let att = att.permute(&[0, 2, 1])?.reshape(&[bf, c, h, w])?;
        let x = x.add(&att)?;

        // temporal: tokens are frames, pixels ride in the batch axis
        let n = self.norm_t.forward(&x)?;
        let tokens = n
            .reshape(&[b, frames, c, hw])?
            .permute(&[0, 3, 1, 2])? // [B, hw, F, C]
            .reshape(&[b * hw, frames, c])?;
        let att = multi_head(
            &self.qt.forward(&tokens)?,
            &self.kt.forward(&tokens)?,
            &self.vt.forward(&tokens)?,
            self.heads,
        )?;
        let att = self.out_t.forward(&att)?;
        let att = att
            .reshape(&[b, hw, frames, c])?
            .permute(&[0, 2, 3, 1])? // [B, F, C, hw]
            .reshape(&[bf, c, h, w])?;
        Ok(x.add(&att)?)
    }
}

/// Caption tokens are embedded, the projected timestep embedding is added to
/// every token, and bottleneck tokens cross-attend into them (queries from
/// the feature map, keys/values from the fused captions) with a residual
/// connection through a zero-initialized projection.
pub struct CaptionCrossAttention<T: Scalar> {
    embed: Tensor<T>,
    t_fuse: Linear<T>,
    norm_q: GroupNorm<T>,
    q: Linear<T>,
    k: Linear<T>,
    v: Linear<T>,
    out: Linear<T>,
    heads: usize,
    vocab: usize,
}

impl<T: Scalar> CaptionCrossAttention<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, c: usize, cfg: &ModelConfig) -> Self {
        CaptionCrossAttention {
            embed: ps.normal(&format!("{}.embed", name), &[cfg.vocab_size, cfg.caption_dim], 0.02),
            t_fuse: Linear::new(ps, &format!("{}.tfuse", name), cfg.caption_dim, cfg.t_emb_dim),
            norm_q: GroupNorm::new(ps, &format!("{}.qnorm", name), c),
            q: Linear::new(ps, &format!("{}.q", name), c, c),
            k: Linear::new(ps, &format!("{}.k", name), c, cfg.caption_dim),
            v: Linear::new(ps, &format!("{}.v", name), c, cfg.caption_dim),
            out: Linear::new_zero(ps, &format!("{}.out", name), c, c),
            heads: cfg.heads,
            vocab: cfg.vocab_size,
        }
    }

    /// `x` is `[B*F, C, h, w]`; one caption per batch element.
    pub fn forward(
        &self,
        x: &Tensor<T>,
        captions: &[Vec<u32>],
        t_emb: &Tensor<T>,
        frames: usize,
    ) -> Result<Tensor<T>> {
        let shape = x.shape().to_vec();
        let (bf, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let b = bf / frames;
        if captions.len() != b {
            return Err(NetError::Shape(format!("{} captions for batch of {}", captions.len(), b)));
        }
        let hw = h * w;
        let n = self.norm_q.forward(x)?;
        // all of a sequence's bottleneck tokens attend to its caption
        let tokens = n
            .reshape(&[b, frames, c, hw])?
            .permute(&[0, 1, 3, 2])? // [B, F, hw, C]
            .reshape(&[b, frames * hw, c])?;
        let mut outs: Vec<Tensor<T>> = Vec::with_capacity(b);
        for (bi, caption) in captions.iter().enumerate() {
            if caption.is_empty() {
                return Err(NetError::Vocabulary("empty caption".into()));
            }
            let ids: Vec<usize> = caption.iter().map(|&t| t as usize).collect();
            if let Some(&bad) = ids.iter().find(|&&id| id >= self.vocab) {
                return Err(NetError::Vocabulary(format!(
                    "token id {} outside vocabulary of {}",
                    bad, self.vocab
                )));
            }
            let tok = self.embed.embedding(&ids)?; // [L, D]
            let fused_t = self.t_fuse.forward(&t_emb.narrow(0, bi, 1)?.silu())?; // [1, D]
            let fused = tok.add(&fused_t.repeat_interleave0(ids.len())?)?;
            let keys = self.k.forward(&fused)?.reshape(&[1, ids.len(), c])?;
            let vals = self.v.forward(&fused)?.reshape(&[1, ids.len(), c])?;
            let queries = self.q.forward(&tokens.narrow(0, bi, 1)?)?;
            let att = multi_head(&queries, &keys, &vals, self.heads)?;
            outs.push(self.out.forward(&att)?);
        }
        let refs: Vec<&Tensor<T>> = outs.iter().collect();
        let att = Tensor::concat(0, &refs)?; // [B, F*hw, C]
        let att = att
            .reshape(&[b, frames, hw, c])?
            .permute(&[0, 1, 3, 2])? // [B, F, C, hw]
            .reshape(&[bf, c, h, w])?;
        Ok(x.add(&att)?)
    }
}

/// Free-function form mirroring the operation contract.
pub fn caption_cross_attention<T: Scalar>(
    layer: &CaptionCrossAttention<T>,
    bottleneck: &Tensor<T>,
    captions: &[Vec<u32>],
    t_emb: &Tensor<T>,
    frames: usize,
) -> Result<Tensor<T>> {
    layer.forward(bottleneck, captions, t_emb, frames)
}
