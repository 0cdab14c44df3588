//! On-disk dataset layout:
//!
//! ```text
//! <root>/manifest.txt          one seed per line
//! <root>/<seed>/frame_<k>.l4dt   [2,H,W] range image (sentinel -1 = invalid)
//! <root>/<seed>/sketch_<k>.l4dt  [2,H,W] binary road sketch
//! <root>/<seed>/prior_<k>.l4dt   [2,H,W] object prior image
//! <root>/<seed>/caption.txt      space-separated token names
//! <root>/<seed>/boxes.jsonl      one annotation record per line
//! ```

use crate::{token_id, token_name, BoxAnnotation, Category, Result, SceneError, SequenceSample};
use lidarseq_codec::EquirectImage;
use lidarseq_tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One line of `boxes.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxRecord {
    pub id: usize,
    pub frame: usize,
    pub category: Category,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub heading: f64,
}

impl From<&BoxAnnotation> for BoxRecord {
    fn from(b: &BoxAnnotation) -> Self {
        BoxRecord {
            id: b.id,
            frame: b.frame,
            category: b.category,
            l: b.length,
            w: b.width,
            h: b.height,
            cx: b.center[0],
            cy: b.center[1],
            cz: b.center[2],
            heading: b.heading,
        }
    }
}

impl From<&BoxRecord> for BoxAnnotation {
    fn from(r: &BoxRecord) -> Self {
        BoxAnnotation {
            id: r.id,
            frame: r.frame,
            category: r.category,
            length: r.l,
            width: r.w,
            height: r.h,
            center: [r.cx, r.cy, r.cz],
            heading: r.heading,
        }
    }
}

pub fn sample_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(seed.to_string())
}

pub fn write_sample(dir: &Path, sample: &SequenceSample) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, frame) in sample.frames.iter().enumerate() {
        lidarseq_tensor::save(dir.join(format!("frame_{}.l4dt", k)), frame.channels())?;
    }
    for (k, sketch) in sample.sketches.iter().enumerate() {
        lidarseq_tensor::save(dir.join(format!("sketch_{}.l4dt", k)), sketch)?;
    }
    for (k, prior) in sample.priors.iter().enumerate() {
        lidarseq_tensor::save(dir.join(format!("prior_{}.l4dt", k)), prior)?;
    }
    let names: Vec<&str> = sample
        .caption
        .iter()
        .map(|&t| token_name(t))
        .collect::<Result<_>>()?;
    fs::write(dir.join("caption.txt"), names.join(" ") + "\n")?;
    let mut jsonl = fs::File::create(dir.join("boxes.jsonl"))?;
    for b in &sample.boxes {
        let record = BoxRecord::from(b);
        writeln!(jsonl, "{}", serde_json::to_string(&record).expect("plain struct serializes"))?;
    }
    Ok(())
}

pub fn load_sample(dir: &Path) -> Result<SequenceSample> {
    let seed: u64 = dir
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.parse().ok())
        .unwrap_or(0);
    let mut frames = Vec::new();
    let mut sketches = Vec::new();
    let mut priors = Vec::new();
    for k in 0.. {
        let frame_path = dir.join(format!("frame_{}.l4dt", k));
        if !frame_path.exists() {
            break;
        }
        let t: Tensor<f32> = lidarseq_tensor::load(&frame_path)?;
        frames.push(EquirectImage::from_tensor_threshold(&t, -1.0)?);
        let sketch_path = dir.join(format!("sketch_{}.l4dt", k));
        let prior_path = dir.join(format!("prior_{}.l4dt", k));
        for (p, what) in [(&sketch_path, "sketch"), (&prior_path, "prior")] {
            if !p.exists() {
                return Err(SceneError::Layout(format!(
                    "{}: missing {} for frame {}",
                    dir.display(),
                    what,
                    k
                )));
            }
        }
        sketches.push(lidarseq_tensor::load(&sketch_path)?);
        priors.push(lidarseq_tensor::load(&prior_path)?);
    }
    if frames.is_empty() {
        return Err(SceneError::Layout(format!("{}: no frames found", dir.display())));
    }
    let caption_text = fs::read_to_string(dir.join("caption.txt"))
        .map_err(|e| SceneError::Layout(format!("{}: caption.txt: {}", dir.display(), e)))?;
    let caption = caption_text
        .split_whitespace()
        .map(token_id)
        .collect::<Result<Vec<u32>>>()?;
    let boxes_text = fs::read_to_string(dir.join("boxes.jsonl"))
        .map_err(|e| SceneError::Layout(format!("{}: boxes.jsonl: {}", dir.display(), e)))?;
    let mut boxes = Vec::new();
    for line in boxes_text.lines().filter(|l| !l.trim().is_empty()) {
        let record: BoxRecord = serde_json::from_str(line)
            .map_err(|e| SceneError::Layout(format!("bad boxes.jsonl line '{}': {}", line, e)))?;
        boxes.push(BoxAnnotation::from(&record));
    }
    Ok(SequenceSample { frames, sketches, priors, caption, boxes, seed })
}

pub fn write_manifest(root: &Path, seeds: &[u64]) -> Result<()> {
    fs::create_dir_all(root)?;
    let body: String = seeds.iter().map(|s| format!("{}\n", s)).collect();
    fs::write(root.join("manifest.txt"), body)?;
    Ok(())
}

pub fn load_manifest(root: &Path) -> Result<Vec<u64>> {
    let text = fs::read_to_string(root.join("manifest.txt"))
        .map_err(|e| SceneError::Layout(format!("{}: manifest.txt: {}", root.display(), e)))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| SceneError::Layout(format!("bad manifest line '{}'", l)))
        })
        .collect()
}
