//! Spherical projection and its inverse.

use crate::scale::{scale_range, unscale_range};
use crate::{EquirectImage, Point, PointCloud, Result, SensorConfig, MIN_RANGE};
use lidarseq_tensor::Tensor;

/// Bin a cloud onto the equirectangular grid. Points outside the elevation
/// field of view, beyond `d_max` or closer than [`MIN_RANGE`] are dropped;
/// when several points land in one bin the nearest return wins.
pub fn project(pc: &PointCloud, cfg: &SensorConfig) -> Result<EquirectImage> {
    cfg.validate()?;
    let hw = cfg.h * cfg.w;
    let mut range = vec![f64::INFINITY; hw];
    let mut refl = vec![0f64; hw];
    let mut valid = vec![false; hw];
    for p in &pc.points {
        let r = p.range();
        if !(r.is_finite() && r >= MIN_RANGE && r <= cfg.d_max) {
            continue;
        }
        let Some(i) = cfg.elevation_bin(p.elevation()) else {
            continue;
        };
        let j = cfg.azimuth_bin(p.azimuth());
        let idx = i * cfg.w + j;
        if r < range[idx] {
            range[idx] = r;
            refl[idx] = p.reflectance;
            valid[idx] = true;
        }
    }
    let mut data = vec![0f32; 2 * hw];
    for idx in 0..hw {
        if valid[idx] {
            data[idx] = scale_range(range[idx], cfg.d_max)? as f32;
            data[hw + idx] = if cfg.has_reflectance {
                (2.0 * refl[idx] - 1.0) as f32
            } else {
                0.0
            };
        } else {
            data[idx] = -1.0;
        }
    }
    let channels = Tensor::from_vec(&[2, cfg.h, cfg.w], data)?;
    Ok(EquirectImage::from_parts(channels, valid, cfg.h, cfg.w))
}

/// One point per valid pixel, placed at the bin-centre direction at the
/// decoded range. `project(unproject(img))` reproduces `img` bit-exactly on
/// valid pixels.
pub fn unproject(img: &EquirectImage, cfg: &SensorConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let (h, w) = img.size();
    if (h, w) != (cfg.h, cfg.w) {
        return Err(crate::CodecError::Validation(format!(
            "image is {}x{}, sensor is {}x{}",
            h, w, cfg.h, cfg.w
        )));
    }
    let mut points = Vec::with_capacity(img.valid_count());
    for i in 0..h {
        for j in 0..w {
            if !img.is_valid(i, j) {
                continue;
            }
            let (c_range, c_refl) = img.at(i, j);
            let d = unscale_range(f64::from(c_range).clamp(-1.0, 1.0), cfg.d_max)?;
            let (theta, phi) = cfg.bin_center(i, j);
            let (sp, cp) = (phi.sin(), phi.cos());
            let (st, ct) = (theta.sin(), theta.cos());
            let reflectance = (f64::from(c_refl) + 1.0) / 2.0;
            points.push(Point::new(d * cp * ct, d * cp * st, d * sp, reflectance));
        }
    }
    Ok(PointCloud::new(points))
}
