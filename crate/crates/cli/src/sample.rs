//! `lidarseq sample`: conditioned generation from a checkpoint, with decoded
//! point clouds and BEV previews.

use crate::config::RunConfig;
use anyhow::{anyhow, bail, Context, Result};
use lidarseq_codec::{unproject, EquirectImage, SensorConfig};
use lidarseq_ddpm::{load_checkpoint, sample, Checkpoint, DdpmError};
use lidarseq_metrics::{bev_histogram, BevConfig};
use lidarseq_net::{ConditionBatch, ModelConfig, SeqUNet};
use lidarseq_tensor::Tensor;
use std::io::Write;
use std::path::Path;

/// Conditions loaded from a sample directory (frames not required).
pub struct Conditions {
    pub sketches: Vec<Tensor<f32>>,
    pub priors: Vec<Tensor<f32>>,
    pub caption: Vec<u32>,
}

pub fn load_conditions(dir: &Path) -> Result<Conditions> {
    let mut sketches = Vec::new();
    let mut priors = Vec::new();
    for k in 0.. {
        let sk = dir.join(format!("sketch_{}.l4dt", k));
        if !sk.exists() {
            break;
        }
        sketches.push(lidarseq_tensor::load::<f32>(&sk).map_err(|e| anyhow!("{}", e))?);
        let pr = dir.join(format!("prior_{}.l4dt", k));
        if !pr.exists() {
            bail!("{}: missing prior for frame {}", dir.display(), k);
        }
        priors.push(lidarseq_tensor::load::<f32>(&pr).map_err(|e| anyhow!("{}", e))?);
    }
    if sketches.is_empty() {
        bail!("{}: no sketch_<k>.l4dt conditions found", dir.display());
    }
    let caption_text = std::fs::read_to_string(dir.join("caption.txt"))
        .with_context(|| format!("{}: caption.txt", dir.display()))?;
    let caption = caption_text
        .split_whitespace()
        .map(|t| lidarseq_scene::token_id(t).map_err(|e| anyhow!("{}", e)))
        .collect::<Result<Vec<u32>>>()?;
    Ok(Conditions { sketches, priors, caption })
}

pub fn sensor_from_meta(ckpt: &Checkpoint) -> Result<SensorConfig> {
    let get = |key: &str| -> Result<f64> {
        ckpt.meta_value(key)
            .ok_or_else(|| anyhow!("checkpoint missing meta key '{}'", key))?
            .parse()
            .map_err(|_| anyhow!("bad meta value for '{}'", key))
    };
    Ok(SensorConfig {
        h: get("sensor_h")? as usize,
        w: get("sensor_w")? as usize,
        elev_min: get("sensor_elev_min_rad")?,
        elev_max: get("sensor_elev_max_rad")?,
        d_max: get("sensor_d_max")?,
        has_reflectance: true,
    })
}

/// Rebuild the network a checkpoint describes and load its weights
/// (EMA weights when present, raw otherwise).
pub fn net_from_checkpoint(ckpt: &Checkpoint) -> Result<(SeqUNet<f32>, SensorConfig)> {
    let model_cfg = ModelConfig::from_meta(&ckpt.meta).map_err(|e| anyhow!("{}", e))?;
    let sensor = sensor_from_meta(ckpt)?;
    let net = SeqUNet::<f32>::new(&model_cfg, sensor.h, sensor.w, 0).map_err(|e| anyhow!("{}", e))?;
    let weights = if ckpt.ema.is_empty() { &ckpt.params } else { &ckpt.ema };
    net.params().load_named(weights).map_err(|e| anyhow!("{}", e))?;
    Ok((net, sensor))
}

fn write_pgm(path: &Path, cells: &[f64], grid: usize) -> Result<()> {
    let peak = cells.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let mut out = String::with_capacity(grid * grid * 4 + 32);
    out.push_str(&format!("P2\n{} {}\n255\n", grid, grid));
    for i in 0..grid {
        let row: Vec<String> = (0..grid)
            .map(|j| ((cells[i * grid + j] / peak * 255.0).round() as u8).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sample(
    cfg: &RunConfig,
    ckpt_dir: &Path,
    conditions_dir: &Path,
    out_dir: &Path,
) -> Result<()> {
    let ckpt = load_checkpoint(ckpt_dir).map_err(|e| anyhow!("{}", e))?;
    let (net, sensor) = net_from_checkpoint(&ckpt)?;
    let conditions = load_conditions(conditions_dir)?;
    let f = conditions.sketches.len();
    let (h, w) = net.resolution();
    for (what, t) in [("sketch", &conditions.sketches[0]), ("prior", &conditions.priors[0])] {
        if t.shape() != [2, h, w] {
            bail!(
                "config mismatch: checkpoint model expects [2, {}, {}] conditions, {} dir has {:?} \
                 (model: {:?})",
                h,
                w,
                what,
                t.shape(),
                net.config()
            );
        }
    }

    // assemble the B = 1 condition batch
    let stack = |parts: &[Tensor<f32>]| -> Result<Tensor<f32>> {
        let mut data = Vec::with_capacity(f * 2 * h * w);
        for p in parts {
            data.extend_from_slice(&p.to_vec());
        }
        Ok(Tensor::from_vec(&[1, f, 2, h, w], data)?)
    };
    let cond = ConditionBatch {
        sketch: stack(&conditions.sketches)?,
        prior: stack(&conditions.priors)?,
        captions: vec![conditions.caption.clone()],
    };

    let sampler = cfg.sampler.to_sampler();
    let out = sample(
        |x_t, t| {
            net.forward(x_t, &[t], &cond).map_err(|e| DdpmError::Contract(e.to_string()))
        },
        &[1, f, 2, h, w],
        &sampler,
    )
    .map_err(|e| anyhow!("{}", e))?;

    std::fs::create_dir_all(out_dir)?;
    let bev = BevConfig::default();
    let frame_len = 2 * h * w;
    let data = out.to_vec();
    for k in 0..f {
        let frame = Tensor::from_vec(&[2, h, w], data[k * frame_len..(k + 1) * frame_len].to_vec())?;
        lidarseq_tensor::save(out_dir.join(format!("frame_{}.l4dt", k)), &frame)
            .map_err(|e| anyhow!("{}", e))?;
        let img = EquirectImage::from_tensor_threshold(&frame, cfg.sampler.decode_threshold as f32)
            .map_err(|e| anyhow!("{}", e))?;
        let cloud = unproject(&img, &sensor).map_err(|e| anyhow!("{}", e))?;
        lidarseq_codec::save_cloud_ply(out_dir.join(format!("cloud_{}.ply", k)), &cloud)
            .map_err(|e| anyhow!("{}", e))?;
        let hist = bev_histogram(&cloud, &bev);
        write_pgm(&out_dir.join(format!("bev_{}.pgm", k)), &hist.cells, hist.grid)?;
        // carry the conditions along so the directory is a complete sample
        std::fs::copy(
            conditions_dir.join(format!("sketch_{}.l4dt", k)),
            out_dir.join(format!("sketch_{}.l4dt", k)),
        )?;
        std::fs::copy(
            conditions_dir.join(format!("prior_{}.l4dt", k)),
            out_dir.join(format!("prior_{}.l4dt", k)),
        )?;
    }
    std::fs::copy(conditions_dir.join("caption.txt"), out_dir.join("caption.txt"))?;
    let boxes_src = conditions_dir.join("boxes.jsonl");
    if boxes_src.exists() {
        std::fs::copy(boxes_src, out_dir.join("boxes.jsonl"))?;
    } else {
        std::fs::write(out_dir.join("boxes.jsonl"), "")?;
    }
    let mut info = std::fs::File::create(out_dir.join("sample.toml"))?;
    writeln!(info, "seed = {}", sampler.seed)?;
    writeln!(info, "steps = {}", sampler.steps)?;
    writeln!(info, "t_floor = {:e}", sampler.t_floor)?;
    writeln!(info, "checkpoint = {:?}", ckpt_dir)?;
    writeln!(info, "checkpoint_step = {}", ckpt.step)?;
    println!(
        "sample: {} frames into {} ({} steps, seed {})",
        f,
        out_dir.display(),
        sampler.steps,
        sampler.seed
    );
    Ok(())
}
