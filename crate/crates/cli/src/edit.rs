//! `lidarseq edit`: scripted condition edits over a sample directory.
//!
//! Script format, one operation per line (`#` comments allowed):
//!
//! ```text
//! add_box category=car l=4.5 w=1.9 h=1.6 rho=10 theta=0 phi=-0.05 heading=0 frames=0..4
//! remove_box id=2
//! set_caption_token slot=background token=GRASSY
//! regenerate_prior id=1
//! ```
//!
//! Only the conditions of affected frames are re-rendered; every untouched
//! file is copied byte for byte.

use anyhow::{anyhow, bail, Context, Result};
use lidarseq_codec::{render_object_prior, render_road_sketch, OrientedBox, PointCloud, SensorConfig};
use lidarseq_scene::{
    load_sample, sample_object_prior, token_id, validate_sample, BoxAnnotation, Category,
    ObjectCondition, SequenceSample,
};
use lidarseq_tensor::Tensor;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

#[derive(Debug, Clone)]
pub enum EditOp {
    AddBox { cond: ObjectCondition, frames: Vec<usize> },
    RemoveBox { id: usize },
    SetCaptionToken { slot: String, token: String },
    RegeneratePrior { id: usize },
}

fn parse_fields(rest: &str) -> HashMap<String, String> {
    rest.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn parse_frames(spec: &str, total: usize) -> Result<Vec<usize>> {
    if spec == "all" {
        return Ok((0..total).collect());
    }
    if let Some((a, b)) = spec.split_once("..") {
        let (start, end): (usize, usize) = (a.parse()?, b.parse()?);
        if start >= end || end > total {
            bail!("frame range {} out of 0..{}", spec, total);
        }
        return Ok((start..end).collect());
    }
    let k: usize = spec.parse()?;
    if k >= total {
        bail!("frame {} out of 0..{}", k, total);
    }
    Ok(vec![k])
}

pub fn parse_script(text: &str, total_frames: usize) -> Result<Vec<EditOp>> {
    let mut ops = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (op, rest) = line.split_once(' ').unwrap_or((line, ""));
        let fields = parse_fields(rest);
        let get = |key: &str| -> Result<&String> {
            fields
                .get(key)
                .ok_or_else(|| anyhow!("line {}: '{}' needs {}=", lineno + 1, op, key))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|_| anyhow!("line {}: bad number for {}", lineno + 1, key))
        };
        match op {
            "add_box" => {
                let category = match get("category")?.as_str() {
                    "car" => Category::Car,
                    "truck" => Category::Truck,
                    "pedestrian" => Category::Pedestrian,
                    other => bail!("line {}: unknown category '{}'", lineno + 1, other),
                };
                let frames = match fields.get("frames") {
                    Some(spec) => parse_frames(spec, total_frames)?,
                    None => (0..total_frames).collect(),
                };
                ops.push(EditOp::AddBox {
                    cond: ObjectCondition {
                        category,
                        length: num("l")?,
                        width: num("w")?,
                        height: num("h")?,
                        rho: num("rho")?,
                        theta: num("theta")?,
                        phi: num("phi")?,
                        heading: num("heading")?,
                    },
                    frames,
                });
            }
            "remove_box" => ops.push(EditOp::RemoveBox { id: get("id")?.parse()? }),
            "set_caption_token" => ops.push(EditOp::SetCaptionToken {
                slot: get("slot")?.clone(),
                token: get("token")?.clone(),
            }),
            "regenerate_prior" => ops.push(EditOp::RegeneratePrior { id: get("id")?.parse()? }),
            other => bail!("line {}: unknown operation '{}'", lineno + 1, other),
        }
    }
    Ok(ops)
}

fn slot_index(slot: &str) -> Result<usize> {
    match slot {
        "time" => Ok(0),
        "weather" => Ok(1),
        "background" => Ok(2),
        other => bail!("unknown caption slot '{}' (time|weather|background)", other),
    }
}

struct EditOutcome {
    sample: SequenceSample,
    affected_frames: BTreeSet<usize>,
    caption_changed: bool,
}

fn apply_ops(
    mut sample: SequenceSample,
    ops: &[EditOp],
    sensor: &SensorConfig,
) -> Result<EditOutcome> {
    let mut affected: BTreeSet<usize> = BTreeSet::new();
    let mut caption_changed = false;
    for op in ops {
        match op {
            EditOp::AddBox { cond, frames: which } => {
                if cond.rho > sensor.d_max {
                    bail!(
                        "rejected {:?}: box at rho = {} beyond d_max = {}",
                        op,
                        cond.rho,
                        sensor.d_max
                    );
                }
                let new_id = sample.boxes.iter().map(|b| b.id + 1).max().unwrap_or(0);
                for &f in which {
                    sample.boxes.push(BoxAnnotation {
                        id: new_id,
                        frame: f,
                        category: cond.category,
                        length: cond.length,
                        width: cond.width,
                        height: cond.height,
                        center: cond.center(),
                        heading: cond.heading,
                    });
                    affected.insert(f);
                }
            }
            EditOp::RemoveBox { id } => {
                let before = sample.boxes.len();
                sample.boxes.retain(|b| {
                    if b.id == *id {
                        affected.insert(b.frame);
                        false
                    } else {
                        true
                    }
                });
                if sample.boxes.len() == before {
                    bail!("rejected {:?}: no box with id {}", op, id);
                }
            }
            EditOp::SetCaptionToken { slot, token } => {
                let idx = slot_index(slot).map_err(|e| anyhow!("rejected {:?}: {}", op, e))?;
                let tid = token_id(token).map_err(|e| anyhow!("rejected {:?}: {}", op, e))?;
                if idx >= sample.caption.len() {
                    bail!("rejected {:?}: caption has no slot {}", op, idx);
                }
                if sample.caption[idx] != tid {
                    sample.caption[idx] = tid;
                    caption_changed = true;
                }
            }
            EditOp::RegeneratePrior { id } => {
                let mut any = false;
                for b in sample.boxes.iter().filter(|b| b.id == *id) {
                    affected.insert(b.frame);
                    any = true;
                }
                if !any {
                    bail!("rejected {:?}: no box with id {}", op, id);
                }
            }
        }
    }

    // re-render the affected frames: box channel of the sketch and the full
    // prior image, both from the annotation set
    let hw = sensor.h * sensor.w;
    for &f in &affected {
        let boxes: Vec<&BoxAnnotation> = sample.boxes.iter().filter(|b| b.frame == f).collect();
        let oriented: Vec<OrientedBox> = boxes
            .iter()
            .map(|b| OrientedBox {
                center: b.center,
                length: b.length,
                width: b.width,
                height: b.height,
                heading: b.heading,
            })
            .collect();
        let rendered = render_road_sketch(&[], &oriented, sensor).map_err(|e| anyhow!("{}", e))?;
        // keep the layout channel, replace the box channel
        let mut sketch = sample.sketches[f].to_vec();
        let fresh = rendered.to_vec();
        sketch[hw..2 * hw].copy_from_slice(&fresh[hw..2 * hw]);
        sample.sketches[f] = Tensor::from_vec(&[2, sensor.h, sensor.w], sketch)?;

        let mut points = PointCloud::default();
        for b in &boxes {
            let cond = ObjectCondition::from_center(
                b.category,
                (b.length, b.width, b.height),
                b.center,
                b.heading,
            );
            let pc = sample_object_prior(
                &cond,
                lidarseq_scene::object_seed(sample.seed, b.id),
                sensor.d_max,
            )
            .map_err(|e| anyhow!("{}", e))?;
            points.points.extend(pc.points);
        }
        sample.priors[f] = render_object_prior(&points, sensor).map_err(|e| anyhow!("{}", e))?;
    }
    Ok(EditOutcome { sample, affected_frames: affected, caption_changed })
}

pub fn cmd_edit(sample_dir: &Path, script_path: &Path, out_dir: &Path, sensor: &SensorConfig) -> Result<()> {
    let sample = load_sample(sample_dir).map_err(|e| anyhow!("{}", e))?;
    if sample.frames[0].size() != (sensor.h, sensor.w) {
        bail!(
            "sample is {}x{}, sensor config says {}x{}",
            sample.frames[0].size().0,
            sample.frames[0].size().1,
            sensor.h,
            sensor.w
        );
    }
    let script = std::fs::read_to_string(script_path)
        .with_context(|| format!("reading {}", script_path.display()))?;
    let ops = parse_script(&script, sample.num_frames())?;
    let outcome = apply_ops(sample, &ops, sensor)?;
    validate_sample(&outcome.sample, sensor).map_err(|e| anyhow!("edited bundle invalid: {}", e))?;

    std::fs::create_dir_all(out_dir)?;
    let frames = outcome.sample.num_frames();
    // frames are never touched by edits: byte-for-byte copies
    for k in 0..frames {
        std::fs::copy(
            sample_dir.join(format!("frame_{}.l4dt", k)),
            out_dir.join(format!("frame_{}.l4dt", k)),
        )?;
        for (prefix, tensors) in
            [("sketch", &outcome.sample.sketches), ("prior", &outcome.sample.priors)]
        {
            let name = format!("{}_{}.l4dt", prefix, k);
            if outcome.affected_frames.contains(&k) {
                lidarseq_tensor::save(out_dir.join(&name), &tensors[k])
                    .map_err(|e| anyhow!("{}", e))?;
            } else {
                std::fs::copy(sample_dir.join(&name), out_dir.join(&name))?;
            }
        }
    }
    if outcome.caption_changed {
        let names: Vec<&str> = outcome
            .sample
            .caption
            .iter()
            .map(|&t| lidarseq_scene::token_name(t).map_err(|e| anyhow!("{}", e)))
            .collect::<Result<_>>()?;
        std::fs::write(out_dir.join("caption.txt"), names.join(" ") + "\n")?;
    } else {
        std::fs::copy(sample_dir.join("caption.txt"), out_dir.join("caption.txt"))?;
    }
    // boxes always rewritten from the edited annotation set
    let mut jsonl = String::new();
    for b in &outcome.sample.boxes {
        let record = lidarseq_scene::BoxRecord::from(b);
        jsonl.push_str(&serde_json::to_string(&record).expect("plain struct serializes"));
        jsonl.push('\n');
    }
    std::fs::write(out_dir.join("boxes.jsonl"), jsonl)?;
    println!(
        "edit: {} op(s), {} affected frame(s), caption {} -> {}",
        ops.len(),
        outcome.affected_frames.len(),
        sample_dir.display(),
        out_dir.display()
    );
    Ok(())
}
