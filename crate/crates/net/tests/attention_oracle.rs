//! Factorized space/time attention against a masked full-attention oracle,
//! plus finite-difference gradients through the whole tiny network.

use lidarseq_net::{ConditionBatch, FactorizedSpaceTime, ModelConfig, ParamStore, SeqUNet};
use lidarseq_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Plain scalar-loop multi-head attention over all `F*hw` tokens with a
/// boolean mask deciding which (query, key) pairs may interact.
#[allow(clippy::too_many_arguments)]
fn masked_full_attention(
    tokens: &[f64], // [N, C] row-major
    n: usize,
    c: usize,
    heads: usize,
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    bq: &[f64],
    bk: &[f64],
    bv: &[f64],
    allow: impl Fn(usize, usize) -> bool,
) -> Vec<f64> {
    let proj = |w: &[f64], b: &[f64], row: &[f64]| -> Vec<f64> {
        (0..c)
            .map(|o| b[o] + (0..c).map(|i| w[o * c + i] * row[i]).sum::<f64>())
            .collect()
    };
    let d = c / heads;
    let q: Vec<Vec<f64>> = (0..n).map(|i| proj(wq, bq, &tokens[i * c..(i + 1) * c])).collect();
    let k: Vec<Vec<f64>> = (0..n).map(|i| proj(wk, bk, &tokens[i * c..(i + 1) * c])).collect();
    let v: Vec<Vec<f64>> = (0..n).map(|i| proj(wv, bv, &tokens[i * c..(i + 1) * c])).collect();
    let mut out = vec![0.0; n * c];
    for h in 0..heads {
        for i in 0..n {
            let mut logits = Vec::new();
            let mut keys = Vec::new();
            for j in 0..n {
                if !allow(i, j) {
                    continue;
                }
                let mut dot = 0.0;
                for t in 0..d {
                    dot += q[i][h * d + t] * k[j][h * d + t];
                }
                logits.push(dot / (d as f64).sqrt());
                keys.push(j);
            }
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for t in 0..d {
                let mut acc = 0.0;
                for (w, &j) in exps.iter().zip(&keys) {
                    acc += w / z * v[j][h * d + t];
                }
                out[i * c + h * d + t] = acc;
            }
        }
    }
    out
}

#[test]
fn factorized_attention_matches_masked_full_attention_oracle() {
    let cfg = ModelConfig {
        scales: 2,
        base_c: 8,
        fourier_k: 1,
        heads: 2,
        blocks_per_scale: 1,
        t_emb_dim: 16,
        caption_dim: 16,
        vocab_size: 16,
        frames: 3,
    };
    let (b, f, c, h, w) = (1usize, 3usize, 8usize, 2usize, 2usize);
    let mut ps = ParamStore::<f64>::new(5);
    let layer = FactorizedSpaceTime::new(&mut ps, "attn", c, &cfg);
    // open the zero-init output projections so both stages act
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    for (name, t) in ps.named() {
        if name.ends_with("out.w") || name.contains("sout") || name.contains("tout") {
            t.with_data_mut(|d| {
                for v in d.iter_mut() {
                    *v = rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.3;
                }
            });
        }
    }
    let x = {
        let mut r = ChaCha12Rng::seed_from_u64(7);
        Tensor::<f64>::randn(&[b * f, c, h, w], &mut r)
    };
    let got = layer.forward(&x, f).unwrap().to_vec();

    // oracle: stage 1 over all (frame, pixel) tokens masked to same-frame
    // pairs, stage 2 masked to same-pixel pairs, with the layer's own
    // normalization and projection weights read back out of the store
    let hw = h * w;
    let n_tokens = f * hw;
    let fetch = |name: &str| ps.by_name(name).unwrap().to_vec();
    let gn = |x: &Tensor<f64>, g: &str, bn: &str| -> Tensor<f64> {
        let gamma = Tensor::from_vec(&[c], fetch(g)).unwrap();
        let beta = Tensor::from_vec(&[c], fetch(bn)).unwrap();
        x.group_norm(ModelConfig::gn_groups(c), &gamma, &beta).unwrap()
    };

    // ---- spatial stage
    let n1 = gn(&x, "attn.snorm.g", "attn.snorm.b").to_vec();
    // tokens laid out [f * hw, c]
    let mut tokens = vec![0.0; n_tokens * c];
    for fi in 0..f {
        for ci in 0..c {
            for p in 0..hw {
                tokens[(fi * hw + p) * c + ci] = n1[(fi * c + ci) * hw + p];
            }
        }
    }
    let att1 = masked_full_attention(
        &tokens,
        n_tokens,
        c,
        cfg.heads,
        &fetch("attn.sq.w"),
        &fetch("attn.sk.w"),
        &fetch("attn.sv.w"),
        &fetch("attn.sq.b"),
        &fetch("attn.sk.b"),
        &fetch("attn.sv.b"),
        |i, j| i / hw == j / hw, // same frame only
    );
    // output projection + residual
    let wout = fetch("attn.sout.w");
    let bout = fetch("attn.sout.b");
    let mut x1 = x.to_vec();
    for fi in 0..f {
        for p in 0..hw {
            for o in 0..c {
                let mut acc = bout[o];
                for i in 0..c {
                    acc += wout[o * c + i] * att1[(fi * hw + p) * c + i];
                }
                x1[(fi * c + o) * hw + p] += acc;
            }
        }
    }

    // ---- temporal stage on the residual output
    let x1_t = Tensor::from_vec(&[b * f, c, h, w], x1.clone()).unwrap();
    let n2 = gn(&x1_t, "attn.tnorm.g", "attn.tnorm.b").to_vec();
    let mut tokens2 = vec![0.0; n_tokens * c];
    for fi in 0..f {
        for ci in 0..c {
            for p in 0..hw {
                // token index groups by pixel: p * f + fi
                tokens2[(p * f + fi) * c + ci] = n2[(fi * c + ci) * hw + p];
            }
        }
    }
    let att2 = masked_full_attention(
        &tokens2,
        n_tokens,
        c,
        cfg.heads,
        &fetch("attn.tq.w"),
        &fetch("attn.tk.w"),
        &fetch("attn.tv.w"),
        &fetch("attn.tq.b"),
        &fetch("attn.tk.b"),
        &fetch("attn.tv.b"),
        |i, j| i / f == j / f, // same pixel only
    );
    let wout2 = fetch("attn.tout.w");
    let bout2 = fetch("attn.tout.b");
    let mut want = x1;
    for p in 0..hw {
        for fi in 0..f {
            for o in 0..c {
                let mut acc = bout2[o];
                for i in 0..c {
                    acc += wout2[o * c + i] * att2[(p * f + fi) * c + i];
                }
                want[(fi * c + o) * hw + p] += acc;
            }
        }
    }

    let max_err = got
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(max_err < 1e-10, "max abs err {}", max_err);
}

#[test]
fn full_network_gradients_match_finite_differences() {
    // tiny f64 topology; compare backward against central differences on a
    // spread of parameter coordinates
    let cfg = ModelConfig {
        scales: 2,
        base_c: 4,
        fourier_k: 1,
        heads: 2,
        blocks_per_scale: 1,
        t_emb_dim: 8,
        caption_dim: 8,
        vocab_size: 16,
        frames: 2,
    };
    let net = SeqUNet::<f64>::new(&cfg, 4, 16, 3).unwrap();
    // open every zero-init path so all gradients are live
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    for (name, t) in net.params().named() {
        if name.contains("out") || name.contains("proj") || name.contains(".tconv") || name.contains(".conv2")
        {
            t.with_data_mut(|d| {
                for v in d.iter_mut() {
                    *v = rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.1;
                }
            });
        }
    }
    let x = {
        let mut r = ChaCha12Rng::seed_from_u64(5);
        Tensor::<f64>::randn(&[1, 2, 2, 4, 16], &mut r)
    };
    let cond = ConditionBatch::<f64> {
        sketch: {
            let mut r = ChaCha12Rng::seed_from_u64(6);
            Tensor::<f64>::randn(&[1, 2, 2, 4, 16], &mut r)
        },
        prior: {
            let mut r = ChaCha12Rng::seed_from_u64(7);
            Tensor::<f64>::randn(&[1, 2, 2, 4, 16], &mut r)
        },
        captions: vec![vec![1, 5, 9]],
    };
    let loss_of = |net: &SeqUNet<f64>| -> f64 {
        net.forward(&x, &[0.4], &cond).unwrap().sqr().mean_all().unwrap().item().unwrap()
    };

    // analytic gradients
    let loss = net.forward(&x, &[0.4], &cond).unwrap().sqr().mean_all().unwrap();
    loss.backward().unwrap();

    // probe a few coordinates of several parameters, including attention,
    // caption, control and temporal weights
    let probes = [
        ("in.w", 3usize),
        ("enc.s0.b0.conv1.w", 11),
        ("enc.s0.b0.tconv.w", 2),
        ("enc.s0.b0.alpha", 0),
        ("bot.attn.sq.w", 5),
        ("bot.caption.embed", 9),
        ("ctrl.proj0.w", 1),
        ("dec.fuse1.w", 7),
        ("out.conv.w", 4),
        ("tmlp.l1.w", 6),
    ];
    let step = 1e-5;
    for (name, idx) in probes {
        let p = net
            .params()
            .by_name(name)
            .unwrap_or_else(|| panic!("missing parameter {}", name));
        let grad = p.grad().unwrap_or_else(|| panic!("no gradient on {}", name));
        let analytic = grad[idx];
        let orig = p.to_vec()[idx];
        p.with_data_mut(|d| d[idx] = orig + step);
        let fp = loss_of(&net);
        p.with_data_mut(|d| d[idx] = orig - step);
        let fm = loss_of(&net);
        p.with_data_mut(|d| d[idx] = orig);
        let numeric = (fp - fm) / (2.0 * step);
        let rel = (analytic - numeric).abs() / analytic.abs().max(1.0);
        assert!(
            rel < 1e-3,
            "{}[{}]: analytic {} vs numeric {} (rel {})",
            name,
            idx,
            analytic,
            numeric,
            rel
        );
    }
}
