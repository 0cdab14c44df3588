//! Conversion between 3D LiDAR point clouds and two-channel equirectangular
//! images (log-scaled range + reflectance, both normalized to [-1, 1]), plus
//! rasterizers that draw road layouts, box wireframes and object points onto
//! the same image plane.
//!
//! Pixel conventions, used everywhere in the workspace:
//! - column `j` covers azimuth `[-pi + j*2pi/W, -pi + (j+1)*2pi/W)`;
//! - row `i` covers elevation `(elev_max - (i+1)*de, elev_max - i*de]` with
//!   `de = (elev_max - elev_min)/H`, i.e. row 0 sits at `elev_max`;
//! - invalid pixels carry `(-1, 0)`, and an explicit validity mask rides
//!   along in memory.
//!
//! All angle and range math runs in f64; stored channels are f32. That is
//! what makes `project(unproject(img))` bit-exact on valid pixels.

mod ply;
mod project;
mod render;
mod scale;

pub use ply::{load_cloud_l4dt, load_cloud_ply, save_cloud_l4dt, save_cloud_ply};
pub use project::{project, unproject};
pub use render::{render_object_prior, render_road_sketch, OrientedBox, Polyline};
pub use scale::{scale_range, unscale_range};

use lidarseq_tensor::{Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("sensor config: {0}")]
    Config(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("ply: {0}")]
    Ply(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// Points closer than this are treated as spurious self-returns and dropped,
/// which also keeps the -1 range sentinel unambiguous in f32.
pub const MIN_RANGE: f64 = 0.01;

/// Equirectangular sensor geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    /// Elevation bins (rows).
    pub h: usize,
    /// Azimuth bins (columns); azimuth spans [-pi, pi).
    pub w: usize,
    pub elev_min: f64,
    pub elev_max: f64,
    pub d_max: f64,
    pub has_reflectance: bool,
}

impl Default for SensorConfig {
    /// Desk-scale geometry: 32 x 128 bins, elevation -25 deg..+3 deg, 80 m.
    fn default() -> Self {
        SensorConfig {
            h: 32,
            w: 128,
            elev_min: -25f64.to_radians(),
            elev_max: 3f64.to_radians(),
            d_max: 80.0,
            has_reflectance: true,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h < 2 {
            return Err(CodecError::Config(format!("H = {} must be >= 2", self.h)));
        }
        if self.w < 4 || self.w % 16 != 0 {
            return Err(CodecError::Config(format!(
                "W = {} must be >= 4 and divisible by 16",
                self.w
            )));
        }
        if !(self.elev_min < self.elev_max) {
            return Err(CodecError::Config(format!(
                "elevation range [{}, {}] is empty",
                self.elev_min, self.elev_max
            )));
        }
        if !(self.d_max > 0.0) {
            return Err(CodecError::Config(format!("d_max = {} must be positive", self.d_max)));
        }
        Ok(())
    }

    pub fn elev_step(&self) -> f64 {
        (self.elev_max - self.elev_min) / self.h as f64
    }

    /// Bin of an azimuth angle in [-pi, pi]; +pi wraps onto column 0.
    pub fn azimuth_bin(&self, theta: f64) -> usize {
        let j = ((theta + std::f64::consts::PI) / std::f64::consts::TAU * self.w as f64).floor();
        (j as isize).rem_euclid(self.w as isize) as usize
    }

    /// Bin of an elevation angle, or None outside (elev_min, elev_max].
    pub fn elevation_bin(&self, phi: f64) -> Option<usize> {
        let i = ((self.elev_max - phi) / self.elev_step()).floor();
        if i >= 0.0 && i < self.h as f64 {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Centre direction of bin (i, j) as (azimuth, elevation).
    pub fn bin_center(&self, i: usize, j: usize) -> (f64, f64) {
        let theta = -std::f64::consts::PI + (j as f64 + 0.5) * std::f64::consts::TAU / self.w as f64;
        let phi = self.elev_max - (i as f64 + 0.5) * self.elev_step();
        (theta, phi)
    }
}

/// One LiDAR return. Reflectance lives in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub reflectance: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, reflectance: f64) -> Self {
        Point { x, y, z, reflectance }
    }

    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn elevation(&self) -> f64 {
        let r = self.range();
        if r == 0.0 {
            0.0
        } else {
            (self.z / r).clamp(-1.0, 1.0).asin()
        }
    }
}

/// A bag of returns in the sensor frame (x forward, y left, z up).
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rotate about the vertical axis by `angle` (positive = towards +y).
    pub fn rotated_z(&self, angle: f64) -> PointCloud {
        let (s, c) = angle.sin_cos();
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z, p.reflectance))
                .collect(),
        }
    }
}

/// A two-channel equirectangular image with an explicit validity mask.
///
/// Channel 0 is normalized range, channel 1 normalized reflectance
/// (`2r - 1`). Invalid pixels are exactly `(-1, 0)`.
#[derive(Debug, Clone)]
pub struct EquirectImage {
    channels: Tensor<f32>,
    valid: Vec<bool>,
    h: usize,
    w: usize,
}

impl EquirectImage {
    pub fn all_invalid(cfg: &SensorConfig) -> Self {
        let mut data = vec![0f32; 2 * cfg.h * cfg.w];
        data[..cfg.h * cfg.w].fill(-1.0);
        EquirectImage {
            channels: Tensor::from_vec(&[2, cfg.h, cfg.w], data).expect("shape matches data"),
            valid: vec![false; cfg.h * cfg.w],
            h: cfg.h,
            w: cfg.w,
        }
    }

    pub(crate) fn from_parts(channels: Tensor<f32>, valid: Vec<bool>, h: usize, w: usize) -> Self {
        EquirectImage { channels, valid, h, w }
    }

    /// Rebuild from a bare `[2, H, W]` tensor; a pixel is valid when its
    /// range channel exceeds `threshold` (use -1.0 for sentinel-encoded
    /// images, something like -0.999 for generated ones).
    pub fn from_tensor_threshold(t: &Tensor<f32>, threshold: f32) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 2 {
            return Err(CodecError::Validation(format!("expected [2,H,W], got {:?}", s)));
        }
        let (h, w) = (s[1], s[2]);
        let data = t.to_vec();
        let mut clean = data.clone();
        let mut valid = vec![false; h * w];
        for p in 0..h * w {
            if data[p] > threshold {
                valid[p] = true;
            } else {
                clean[p] = -1.0;
                clean[h * w + p] = 0.0;
            }
        }
        Ok(EquirectImage {
            channels: Tensor::from_vec(&[2, h, w], clean)?,
            valid,
            h,
            w,
        })
    }

    pub fn channels(&self) -> &Tensor<f32> {
        &self.channels
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn size(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    /// (normalized range, normalized reflectance) at a pixel.
    pub fn at(&self, i: usize, j: usize) -> (f32, f32) {
        let hw = self.h * self.w;
        self.channels.with_data(|d| (d[i * self.w + j], d[hw + i * self.w + j]))
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[i * self.w + j]
    }

    /// Mask as a `[H, W]` 0/1 tensor for the on-disk companion file.
    pub fn mask_tensor(&self) -> Tensor<f32> {
        let data = self.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        Tensor::from_vec(&[self.h, self.w], data).expect("shape matches data")
    }
}
