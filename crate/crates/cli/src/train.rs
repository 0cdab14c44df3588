//! `lidarseq train`: the epsilon-prediction training loop with EMA weights,
//! periodic checkpoints and bit-identical resume.

use crate::batch::stack_samples;
use crate::config::RunConfig;
use anyhow::{anyhow, bail, Context, Result};
use lidarseq_ddpm::{load_checkpoint, save_checkpoint, train_loss, Checkpoint, DdpmError};
use lidarseq_net::SeqUNet;
use lidarseq_scene::{load_manifest, load_sample, sample_dir, SequenceSample};
use lidarseq_tensor::{Adam, AdamState, Ema, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

fn step_rng(seed: u64, step: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed.wrapping_add(step.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn load_dataset(data_dir: &Path) -> Result<Vec<SequenceSample>> {
    let seeds = load_manifest(data_dir).map_err(|e| anyhow!("{}", e))?;
    if seeds.is_empty() {
        bail!("{}: empty dataset manifest", data_dir.display());
    }
    seeds
        .iter()
        .map(|&s| load_sample(&sample_dir(data_dir, s)).map_err(|e| anyhow!("{}", e)))
        .collect()
}

fn sensor_meta(cfg: &RunConfig) -> Vec<(String, String)> {
    let s = cfg.sensor.to_sensor();
    vec![
        ("sensor_h".into(), s.h.to_string()),
        ("sensor_w".into(), s.w.to_string()),
        ("sensor_elev_min_rad".into(), format!("{:e}", s.elev_min)),
        ("sensor_elev_max_rad".into(), format!("{:e}", s.elev_max)),
        ("sensor_d_max".into(), format!("{}", s.d_max)),
        ("sampler_steps".into(), cfg.sampler.steps.to_string()),
        ("sampler_t_floor".into(), format!("{:e}", cfg.sampler.t_floor)),
        ("schedule".into(), "alpha-cosine".into()),
    ]
}

struct TrainState {
    net: SeqUNet<f32>,
    adam: Adam<f32>,
    ema: Ema<f32>,
    step: u64,
    smoothed: f64,
    initial_smoothed: f64,
}

fn checkpoint_of(state: &TrainState, cfg: &RunConfig) -> Checkpoint {
    let named = state.net.params().named();
    let adam_state = state.adam.state();
    let mut meta = state.net.config().to_meta();
    meta.extend(sensor_meta(cfg));
    meta.push(("train_initial_smoothed".into(), format!("{:e}", state.initial_smoothed)));
    let wrap = |values: &[Vec<f32>]| -> Vec<(String, Tensor<f32>)> {
        named
            .iter()
            .zip(values)
            .map(|((name, t), v)| {
                (name.clone(), Tensor::from_vec(t.shape(), v.clone()).expect("same shape"))
            })
            .collect()
    };
    Checkpoint {
        step: state.step,
        adam_step: adam_state.step,
        loss_ema: state.smoothed,
        meta,
        params: named.iter().map(|(n, t)| (n.clone(), t.detach())).collect(),
        ema: wrap(state.ema.values()),
        opt_m: wrap(&adam_state.m),
        opt_v: wrap(&adam_state.v),
    }
}

fn restore(state: &mut TrainState, ckpt: &Checkpoint) -> Result<()> {
    state.net.params().load_named(&ckpt.params).map_err(|e| anyhow!("{}", e))?;
    let order = state.net.params().named();
    let pick = |group: &[(String, Tensor<f32>)], what: &str| -> Result<Vec<Vec<f32>>> {
        order
            .iter()
            .map(|(name, _)| {
                group
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, t)| t.to_vec())
                    .ok_or_else(|| anyhow!("checkpoint missing {} tensor '{}'", what, name))
            })
            .collect()
    };
    let mut adam_state = AdamState { step: ckpt.adam_step, m: Vec::new(), v: Vec::new() };
    adam_state.m = pick(&ckpt.opt_m, "optimizer m")?;
    adam_state.v = pick(&ckpt.opt_v, "optimizer v")?;
    state.adam.load_state(adam_state);
    state.ema = Ema::from_values(state.ema.decay, pick(&ckpt.ema, "ema")?);
    state.step = ckpt.step;
    state.smoothed = ckpt.loss_ema;
    state.initial_smoothed = ckpt
        .meta_value("train_initial_smoothed")
        .and_then(|v| v.parse().ok())
        .unwrap_or(ckpt.loss_ema);
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, data_dir: &Path, out_dir: &Path) -> Result<()> {
    let dataset = load_dataset(data_dir)?;
    let frames = dataset[0].num_frames();
    let (h, w) = dataset[0].frames[0].size();
    let model_cfg = cfg.model.to_model(frames);
    std::fs::create_dir_all(out_dir)?;
    cfg.echo_into(out_dir)?;

    let net = SeqUNet::<f32>::new(&model_cfg, h, w, cfg.train.seed).map_err(|e| anyhow!("{}", e))?;
    let tensors = net.params().tensors();
    let mut state = TrainState {
        adam: Adam::new(cfg.train.lr),
        ema: Ema::new(cfg.train.ema_decay, &tensors),
        net,
        step: 0,
        smoothed: 0.0,
        initial_smoothed: 0.0,
    };

    let latest = out_dir.join("latest");
    if latest.join("manifest.txt").exists() {
        let ckpt = load_checkpoint(&latest).map_err(|e| anyhow!("{}", e))?;
        restore(&mut state, &ckpt)?;
        println!("train: resuming from step {}", state.step);
    }

    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_dir.join("train.log"))
        .with_context(|| "opening train.log")?;

    let params = state.net.params().tensors();
    let t0 = Instant::now();
    while state.step < cfg.train.max_steps {
        let step = state.step + 1;
        let mut rng = step_rng(cfg.train.seed, step);
        let picks: Vec<&SequenceSample> =
            (0..cfg.train.batch).map(|_| &dataset[rng.gen_range(0..dataset.len())]).collect();
        let (x0, cond) = stack_samples(&picks)?;
        let net_ref = &state.net;
        let (loss, _times) = train_loss(
            |x_t, times| {
                net_ref
                    .forward(x_t, times, &cond)
                    .map_err(|e| DdpmError::Contract(e.to_string()))
            },
            &x0,
            cfg.train.t_floor,
            &mut rng,
        )
        .map_err(|e| anyhow!("{}", e))?;
        let loss_value = f64::from(loss.item().map_err(|e| anyhow!("{}", e))?);
        if !loss_value.is_finite() {
            let line = format!(
                "step {} abort non-finite loss; last checkpoint retained\n",
                step
            );
            log.write_all(line.as_bytes())?;
            bail!("non-finite loss at step {}; last checkpoint retained", step);
        }
        loss.backward().map_err(|e| anyhow!("{}", e))?;
        state.adam.step(&params).map_err(|e| anyhow!("{}", e))?;
        state.ema.update(&params).map_err(|e| anyhow!("{}", e))?;

        if state.step == 0 && state.initial_smoothed == 0.0 {
            state.smoothed = loss_value;
            state.initial_smoothed = loss_value;
        } else {
            let a = cfg.train.loss_smoothing;
            state.smoothed = a * state.smoothed + (1.0 - a) * loss_value;
        }
        state.step = step;

        if step % cfg.train.log_every == 0 || step == 1 {
            let line = format!(
                "step {} loss {:.6} smoothed {:.6} elapsed_s {:.1}\n",
                step,
                loss_value,
                state.smoothed,
                t0.elapsed().as_secs_f64()
            );
            log.write_all(line.as_bytes())?;
            print!("{}", line);
        }
        if step % cfg.train.ckpt_every == 0 {
            let ckpt = checkpoint_of(&state, cfg);
            save_checkpoint(&out_dir.join(format!("ckpt_{}", step)), &ckpt)
                .map_err(|e| anyhow!("{}", e))?;
            save_checkpoint(&latest, &ckpt).map_err(|e| anyhow!("{}", e))?;
        }
        if cfg.train.stop_loss_ratio > 0.0
            && state.smoothed < cfg.train.stop_loss_ratio * state.initial_smoothed
        {
            println!(
                "train: smoothed loss {:.6} under {} x initial {:.6}, stopping at step {}",
                state.smoothed, cfg.train.stop_loss_ratio, state.initial_smoothed, step
            );
            break;
        }
    }
    let ckpt = checkpoint_of(&state, cfg);
    save_checkpoint(&latest, &ckpt).map_err(|e| anyhow!("{}", e))?;
    println!(
        "train: finished at step {} (smoothed loss {:.6}, initial {:.6})",
        state.step, state.smoothed, state.initial_smoothed
    );
    Ok(())
}
