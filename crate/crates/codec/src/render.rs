//! Rasterization of pixel-aligned conditions: road layouts, 3D box
//! wireframes and object point clouds, all drawn with the projection rules
//! of [`crate::project`] so every condition is pixel-to-pixel aligned with
//! the range image.

use crate::{project, CodecError, Point, PointCloud, Result, SensorConfig, MIN_RANGE};
use lidarseq_tensor::Tensor;

/// Arc-length sampling step for polylines and box edges, in meters.
pub const SAMPLE_STEP: f64 = 0.1;

/// A 3D polyline in the sensor frame.
#[derive(Debug, Clone, Default)]
pub struct Polyline {
    pub points: Vec<[f64; 3]>,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Polyline { points }
    }
}

/// An upright oriented box: `length` along the heading direction, `width`
/// across, `height` up, rotated by `heading` about the vertical axis.
#[derive(Debug, Clone, Copy)]
pub struct OrientedBox {
    pub center: [f64; 3],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub heading: f64,
}

impl OrientedBox {
    pub fn validate(&self) -> Result<()> {
        if self.length <= 0.0 || self.width <= 0.0 || self.height <= 0.0 {
            return Err(CodecError::Validation(format!(
                "degenerate box extents {} x {} x {}",
                self.length, self.width, self.height
            )));
        }
        Ok(())
    }

    /// The 8 corners, bottom face first, counter-clockwise from front-left.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (s, c) = self.heading.sin_cos();
        let (hl, hw, hh) = (self.length / 2.0, self.width / 2.0, self.height / 2.0);
        let mut out = [[0.0; 3]; 8];
        for (k, (dx, dy, dz)) in [
            (hl, hw, -hh),
            (-hl, hw, -hh),
            (-hl, -hw, -hh),
            (hl, -hw, -hh),
            (hl, hw, hh),
            (-hl, hw, hh),
            (-hl, -hw, hh),
            (hl, -hw, hh),
        ]
        .into_iter()
        .enumerate()
        {
            out[k] = [
                self.center[0] + c * dx - s * dy,
                self.center[1] + s * dx + c * dy,
                self.center[2] + dz,
            ];
        }
        out
    }

    /// The 12 wireframe edges as corner-index pairs.
    pub fn edges() -> [(usize, usize); 12] {
        [
            (0, 1), (1, 2), (2, 3), (3, 0), // bottom
            (4, 5), (5, 6), (6, 7), (7, 4), // top
            (0, 4), (1, 5), (2, 6), (3, 7), // verticals
        ]
    }
}

/// Stamp 1.0 into `plane` at the pixel of every sample that projects into the
/// field of view.
fn stamp_segment(plane: &mut [f32], a: [f64; 3], b: [f64; 3], cfg: &SensorConfig) {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
    let n = (len / SAMPLE_STEP).ceil().max(1.0) as usize;
    for s in 0..=n {
        let t = s as f64 / n as f64;
        let p = Point::new(
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
            0.0,
        );
        let r = p.range();
        if !(r >= MIN_RANGE && r <= cfg.d_max) {
            continue;
        }
        if let Some(i) = cfg.elevation_bin(p.elevation()) {
            plane[i * cfg.w + cfg.azimuth_bin(p.azimuth())] = 1.0;
        }
    }
}

/// Rasterize curbs/lane lines (channel 0) and box wireframes (channel 1)
/// into a binary `[2, H, W]` sketch aligned with the range image.
pub fn render_road_sketch(
    layout: &[Polyline],
    boxes: &[OrientedBox],
    cfg: &SensorConfig,
) -> Result<Tensor<f32>> {
    cfg.validate()?;
    let hw = cfg.h * cfg.w;
    let mut data = vec![0f32; 2 * hw];
    {
        let (ch0, ch1) = data.split_at_mut(hw);
        for line in layout {
            for seg in line.points.windows(2) {
                stamp_segment(ch0, seg[0], seg[1], cfg);
            }
        }
        for b in boxes {
            b.validate()?;
            let corners = b.corners();
            for (s, e) in OrientedBox::edges() {
                stamp_segment(ch1, corners[s], corners[e], cfg);
            }
        }
    }
    Ok(Tensor::from_vec(&[2, cfg.h, cfg.w], data)?)
}

/// Project synthetic object points onto the image plane with the exact
/// semantics of [`project`]; background pixels are `(-1, 0)`.
pub fn render_object_prior(obj_points: &PointCloud, cfg: &SensorConfig) -> Result<Tensor<f32>> {
    Ok(project(obj_points, cfg)?.channels().clone())
}
