//! Checkpoints: one L4DT file per tensor plus a plain-text manifest listing
//! (name, shape, file), the training step, optimizer state and an opaque
//! key/value config echo.

use crate::{DdpmError, Result};
use lidarseq_tensor::Tensor;
use std::fs;
use std::io::Write;
use std::path::Path;

const HEADER: &str = "lidarseq-checkpoint v1";

#[derive(Debug, Default)]
pub struct Checkpoint {
    pub step: u64,
    pub adam_step: u64,
    pub loss_ema: f64,
    /// Config echo: model topology, schedule and sampler settings.
    pub meta: Vec<(String, String)>,
    pub params: Vec<(String, Tensor<f32>)>,
    pub ema: Vec<(String, Tensor<f32>)>,
    pub opt_m: Vec<(String, Tensor<f32>)>,
    pub opt_v: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn shape_str(shape: &[usize]) -> String {
    if shape.is_empty() {
        "0d".to_string()
    } else {
        shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    }
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    if s == "0d" {
        return Ok(vec![]);
    }
    s.split('x')
        .map(|d| d.parse().map_err(|_| DdpmError::Checkpoint(format!("bad shape '{}'", s))))
        .collect()
}

fn write_group(
    manifest: &mut impl Write,
    dir: &Path,
    kind: &str,
    sub: &str,
    tensors: &[(String, Tensor<f32>)],
) -> Result<()> {
    if tensors.is_empty() {
        return Ok(());
    }
    let subdir = dir.join(sub);
    fs::create_dir_all(&subdir)?;
    for (name, t) in tensors {
        if name.contains(|c: char| c == '/' || c.is_whitespace()) {
            return Err(DdpmError::Checkpoint(format!("unsafe tensor name '{}'", name)));
        }
        let rel = format!("{}/{}.l4dt", sub, name);
        lidarseq_tensor::save(dir.join(&rel), t)?;
        writeln!(manifest, "{} {} {} {}", kind, name, shape_str(t.shape()), rel)?;
    }
    Ok(())
}

pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = Vec::new();
    writeln!(manifest, "{}", HEADER)?;
    writeln!(manifest, "step {}", ckpt.step)?;
    writeln!(manifest, "adam_step {}", ckpt.adam_step)?;
    writeln!(manifest, "loss_ema {:e}", ckpt.loss_ema)?;
    for (k, v) in &ckpt.meta {
        writeln!(manifest, "meta {} {}", k, v)?;
    }
    write_group(&mut manifest, dir, "param", "params", &ckpt.params)?;
    write_group(&mut manifest, dir, "ema", "ema", &ckpt.ema)?;
    write_group(&mut manifest, dir, "optm", "opt_m", &ckpt.opt_m)?;
    write_group(&mut manifest, dir, "optv", "opt_v", &ckpt.opt_v)?;
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(dir.join("manifest.txt"))
        .map_err(|e| DdpmError::Checkpoint(format!("{}: {}", dir.display(), e)))?;
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(DdpmError::Checkpoint("missing or unknown header".into()));
    }
    let mut ckpt = Checkpoint::default();
    let mut seen = std::collections::HashSet::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ' ');
        let tag = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("");
        match tag {
            "step" => {
                ckpt.step = rest
                    .parse()
                    .map_err(|_| DdpmError::Checkpoint(format!("bad step '{}'", rest)))?
            }
            "adam_step" => {
                ckpt.adam_step = rest
                    .parse()
                    .map_err(|_| DdpmError::Checkpoint(format!("bad adam_step '{}'", rest)))?
            }
            "loss_ema" => {
                ckpt.loss_ema = rest
                    .parse()
                    .map_err(|_| DdpmError::Checkpoint(format!("bad loss_ema '{}'", rest)))?
            }
            "meta" => {
                let mut kv = rest.splitn(2, ' ');
                let k = kv.next().unwrap_or("").to_string();
                let v = kv.next().unwrap_or("").to_string();
                ckpt.meta.push((k, v));
            }
            "param" | "ema" | "optm" | "optv" => {
                let fields: Vec<&str> = rest.split(' ').collect();
                if fields.len() != 3 {
                    return Err(DdpmError::Checkpoint(format!("bad tensor line '{}'", line)));
                }
                let (name, shape_s, rel) = (fields[0], fields[1], fields[2]);
                if tag == "param" && !seen.insert(name.to_string()) {
                    return Err(DdpmError::Checkpoint(format!("duplicate parameter '{}'", name)));
                }
                let shape = parse_shape(shape_s)?;
                let t: Tensor<f32> = lidarseq_tensor::load(dir.join(rel))?;
                if t.shape() != shape.as_slice() {
                    return Err(DdpmError::Checkpoint(format!(
                        "{}: file shape {:?} does not match manifest {:?}",
                        rel,
                        t.shape(),
                        shape
                    )));
                }
                let entry = (name.to_string(), t);
                match tag {
                    "param" => ckpt.params.push(entry),
                    "ema" => ckpt.ema.push(entry),
                    "optm" => ckpt.opt_m.push(entry),
                    _ => ckpt.opt_v.push(entry),
                }
            }
            other => {
                return Err(DdpmError::Checkpoint(format!("unknown manifest tag '{}'", other)))
            }
        }
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = Checkpoint {
            step: 42,
            adam_step: 42,
            loss_ema: 0.125,
            meta: vec![("model_scales".into(), "3".into()), ("sampler_steps".into(), "256".into())],
            params: vec![
                ("enc.w".into(), Tensor::from_vec(&[2, 2], vec![1f32, 2., 3., 4.]).unwrap()),
                ("enc.b".into(), Tensor::from_vec(&[2], vec![0.5f32, -0.5]).unwrap()),
            ],
            ema: vec![("enc.w".into(), Tensor::from_vec(&[2, 2], vec![1f32, 2., 3., 4.]).unwrap())],
            opt_m: vec![],
            opt_v: vec![],
        };
        save_checkpoint(dir.path(), &ckpt).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.step, 42);
        assert_eq!(back.loss_ema, 0.125);
        assert_eq!(back.meta_value("model_scales"), Some("3"));
        assert_eq!(back.params.len(), 2);
        assert_eq!(back.params[0].0, "enc.w");
        assert_eq!(back.params[0].1.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(back.ema.len(), 1);
    }

    #[test]
    fn duplicate_parameters_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_vec(&[1], vec![1f32]).unwrap();
        let ckpt = Checkpoint {
            params: vec![("w".into(), t.clone()), ("w".into(), t)],
            ..Checkpoint::default()
        };
        save_checkpoint(dir.path(), &ckpt).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(DdpmError::Checkpoint(_))));
    }
}
