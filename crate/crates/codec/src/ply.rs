//! Point cloud import/export: ASCII PLY and L4DT `[N, 4]` tensors.

use crate::{CodecError, Point, PointCloud, Result};
use lidarseq_tensor::Tensor;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn save_cloud_ply(path: impl AsRef<Path>, pc: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", pc.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "property float reflectance")?;
    writeln!(w, "end_header")?;
    for p in &pc.points {
        writeln!(w, "{} {} {} {}", p.x as f32, p.y as f32, p.z as f32, p.reflectance as f32)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_cloud_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut lines = BufReader::new(File::open(path)?).lines();
    fn expect(
        lines: &mut impl Iterator<Item = std::io::Result<String>>,
        path: &Path,
        want: &str,
    ) -> Result<()> {
        match lines.next() {
            Some(Ok(l)) if l.trim() == want => Ok(()),
            other => Err(CodecError::Ply(format!(
                "{}: expected '{}', got {:?}",
                path.display(),
                want,
                other
            ))),
        }
    }
    expect(&mut lines, path, "ply")?;
    expect(&mut lines, path, "format ascii 1.0")?;
    let count_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| CodecError::Ply("missing element line".into()))?;
    let n: usize = count_line
        .trim()
        .strip_prefix("element vertex ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CodecError::Ply(format!("bad element line '{}'", count_line)))?;
    for prop in ["property float x", "property float y", "property float z", "property float reflectance"] {
        expect(&mut lines, path, prop)?;
    }
    expect(&mut lines, path, "end_header")?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| CodecError::Ply("truncated vertex data".into()))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CodecError::Ply(format!("bad vertex line '{}': {}", line, e)))?;
        if vals.len() != 4 {
            return Err(CodecError::Ply(format!("vertex line has {} fields", vals.len())));
        }
        points.push(Point::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(PointCloud::new(points))
}

pub fn save_cloud_l4dt(path: impl AsRef<Path>, pc: &PointCloud) -> Result<()> {
    let mut data = Vec::with_capacity(pc.len() * 4);
    for p in &pc.points {
        data.extend_from_slice(&[p.x as f32, p.y as f32, p.z as f32, p.reflectance as f32]);
    }
    let t = Tensor::from_vec(&[pc.len(), 4], data)?;
    lidarseq_tensor::save(path, &t)?;
    Ok(())
}

pub fn load_cloud_l4dt(path: impl AsRef<Path>) -> Result<PointCloud> {
    let t: Tensor<f32> = lidarseq_tensor::load(path)?;
    let s = t.shape();
    if s.len() != 2 || s[1] != 4 {
        return Err(CodecError::Validation(format!("expected [N,4] cloud tensor, got {:?}", s)));
    }
    let data = t.to_vec();
    let points = data
        .chunks_exact(4)
        .map(|c| Point::new(c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64))
        .collect();
    Ok(PointCloud::new(points))
}
