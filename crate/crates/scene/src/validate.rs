//! Invariant checks shared by tests and the edit workflow.

use crate::{Result, SceneError, SceneWorld, SequenceSample, FRAME_DT};
use lidarseq_codec::{OrientedBox, Point, SensorConfig, MIN_RANGE};

/// Structural world invariants: bounded counts, no initial interpenetration,
/// boxes on the ground plane, continuous ego motion.
pub fn validate_world(world: &SceneWorld) -> Result<()> {
    if world.agents.len() > 8 {
        return Err(SceneError::Validation(format!("{} agents exceed the bound", world.agents.len())));
    }
    for (i, a) in world.agents.iter().enumerate() {
        if (a.center[2] - a.height / 2.0).abs() > 1e-9 {
            return Err(SceneError::Validation(format!("agent {} floats off the ground", i)));
        }
        for (j, b) in world.agents.iter().enumerate().skip(i + 1) {
            let dx = a.center[0] - b.center[0];
            let dy = a.center[1] - b.center[1];
            if (dx * dx + dy * dy).sqrt() <= a.footprint_radius() + b.footprint_radius() {
                return Err(SceneError::Validation(format!("agents {} and {} interpenetrate", i, j)));
            }
        }
    }
    if world.ego_speed * FRAME_DT >= 3.0 {
        return Err(SceneError::Validation(format!(
            "ego displacement {} m per frame breaks continuity",
            world.ego_speed * FRAME_DT
        )));
    }
    Ok(())
}

/// Pixels of a box region: dense surface samples of the (slightly inflated)
/// box, projected with the shared binning, then dilated by one pixel with
/// azimuth wraparound.
fn box_region_pixels(b: &OrientedBox, cfg: &SensorConfig) -> Vec<bool> {
    let mut hit = vec![false; cfg.h * cfg.w];
    let corners = b.corners();
    // sample each face on a grid fine enough to cover every crossed bin
    let faces: [[usize; 4]; 6] = [
        [0, 1, 2, 3],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [1, 2, 6, 5],
        [2, 3, 7, 6],
        [3, 0, 4, 7],
    ];
    for f in faces {
        let (a, u, v) = (corners[f[0]], corners[f[1]], corners[f[3]]);
        let du = [u[0] - a[0], u[1] - a[1], u[2] - a[2]];
        let dv = [v[0] - a[0], v[1] - a[1], v[2] - a[2]];
        let lu = (du[0] * du[0] + du[1] * du[1] + du[2] * du[2]).sqrt();
        let lv = (dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]).sqrt();
        let nu = ((lu / 0.05).ceil() as usize).max(1);
        let nv = ((lv / 0.05).ceil() as usize).max(1);
        for iu in 0..=nu {
            for iv in 0..=nv {
                let (s, t) = (iu as f64 / nu as f64, iv as f64 / nv as f64);
                let p = Point::new(
                    a[0] + s * du[0] + t * dv[0],
                    a[1] + s * du[1] + t * dv[1],
                    a[2] + s * du[2] + t * dv[2],
                    0.0,
                );
                let r = p.range();
                if !(r >= MIN_RANGE && r <= cfg.d_max) {
                    continue;
                }
                if let Some(i) = cfg.elevation_bin(p.elevation()) {
                    hit[i * cfg.w + cfg.azimuth_bin(p.azimuth())] = true;
                }
            }
        }
    }
    // 3x3 dilation, wrapping in azimuth only
    let mut dilated = vec![false; cfg.h * cfg.w];
    for i in 0..cfg.h {
        for j in 0..cfg.w {
            if !hit[i * cfg.w + j] {
                continue;
            }
            for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= cfg.h as i64 {
                    continue;
                }
                for dj in -1i64..=1 {
                    let jj = (j as i64 + dj).rem_euclid(cfg.w as i64);
                    dilated[ii as usize * cfg.w + jj as usize] = true;
                }
            }
        }
    }
    dilated
}

/// The consistency triangle: per frame, every object-prior pixel and every
/// sketch box pixel must land inside the dilated projection of some
/// annotation box.
pub fn validate_sample(sample: &SequenceSample, cfg: &SensorConfig) -> Result<()> {
    let hw = cfg.h * cfg.w;
    for f in 0..sample.num_frames() {
        let mut allowed = vec![false; hw];
        for b in sample.boxes.iter().filter(|b| b.frame == f) {
            let region = box_region_pixels(
                &OrientedBox {
                    center: b.center,
                    length: b.length,
                    width: b.width,
                    height: b.height,
                    heading: b.heading,
                },
                cfg,
            );
            for (dst, src) in allowed.iter_mut().zip(&region) {
                *dst |= *src;
            }
        }
        let prior = sample.priors[f].to_vec();
        for p in 0..hw {
            if prior[p] > -1.0 && !allowed[p] {
                return Err(SceneError::Validation(format!(
                    "frame {}: prior pixel {} outside every annotation box",
                    f, p
                )));
            }
        }
        let sketch = sample.sketches[f].to_vec();
        for p in 0..hw {
            if sketch[hw + p] > 0.0 && !allowed[p] {
                return Err(SceneError::Validation(format!(
                    "frame {}: sketch box pixel {} outside every annotation box",
                    f, p
                )));
            }
        }
        // field-of-view soundness of the frame itself
        let frame = &sample.frames[f];
        let (h, w) = frame.size();
        if (h, w) != (cfg.h, cfg.w) {
            return Err(SceneError::Validation("frame size mismatch".into()));
        }
    }
    Ok(())
}
