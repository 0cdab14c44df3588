//! Bird's-eye-view occupancy histograms.

use lidarseq_codec::PointCloud;

#[derive(Debug, Clone, Copy)]
pub struct BevConfig {
    /// Cells per side.
    pub grid: usize,
    /// Half-extent in meters; cells cover x, y in [-range, range).
    pub range: f64,
}

impl Default for BevConfig {
    fn default() -> Self {
        BevConfig { grid: 64, range: 40.0 }
    }
}

/// A `[G, G]` occupancy grid normalized to sum 1 (all-zero when empty).
#[derive(Debug, Clone)]
pub struct BevHistogram {
    pub cells: Vec<f64>,
    pub grid: usize,
}

impl BevHistogram {
    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }
}

/// Count points into half-open cells over `[-R, R) x [-R, R)` and normalize.
/// A point exactly at `x = R` is excluded; the origin lands in cell
/// `(G/2, G/2)`.
pub fn bev_histogram(pc: &PointCloud, cfg: &BevConfig) -> BevHistogram {
    let g = cfg.grid;
    let mut cells = vec![0.0f64; g * g];
    let mut count = 0usize;
    for p in &pc.points {
        if p.x < -cfg.range || p.x >= cfg.range || p.y < -cfg.range || p.y >= cfg.range {
            continue;
        }
        let ix = ((p.x + cfg.range) / (2.0 * cfg.range) * g as f64).floor() as usize;
        let iy = ((p.y + cfg.range) / (2.0 * cfg.range) * g as f64).floor() as usize;
        let (ix, iy) = (ix.min(g - 1), iy.min(g - 1));
        cells[ix * g + iy] += 1.0;
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        for c in cells.iter_mut() {
            *c *= inv;
        }
    }
    BevHistogram { cells, grid: g }
}
