//! Synthetic object point clouds: deterministic visible-surface samples that
//! stand in for a learned object generator.

use crate::{Category, ObjectCondition, Result, SceneError};
use lidarseq_codec::{Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Surface sample budget: points per face = DENSITY * area / rho^2.
const DENSITY: f64 = 800.0;

/// Sample the sensor-facing surfaces of one object. Vehicles are boxes with
/// per-face visibility; pedestrians are vertical cylinders sampled on the
/// half facing the sensor. Point count per face scales as `1/rho^2`.
pub fn sample_object_prior(obj: &ObjectCondition, seed: u64, d_max: f64) -> Result<PointCloud> {
    if obj.length <= 0.0 || obj.width <= 0.0 || obj.height <= 0.0 {
        return Err(SceneError::Validation(format!(
            "degenerate object extents {} x {} x {}",
            obj.length, obj.width, obj.height
        )));
    }
    if obj.rho > d_max {
        return Err(SceneError::Validation(format!(
            "object at rho = {} beyond d_max = {}",
            obj.rho, d_max
        )));
    }
    if obj.rho <= 0.0 {
        return Err(SceneError::Validation("object at zero range".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let center = obj.center();
    let refl = obj.category.reflectance();
    let mut points = Vec::new();

    match obj.category {
        Category::Car | Category::Truck => {
            let (hs, hc) = (obj.heading.sin(), obj.heading.cos());
            let to_world = |p: [f64; 3]| -> [f64; 3] {
                [
                    center[0] + hc * p[0] - hs * p[1],
                    center[1] + hs * p[0] + hc * p[1],
                    center[2] + p[2],
                ]
            };
            let (hl, hw, hh) = (obj.length / 2.0, obj.width / 2.0, obj.height / 2.0);
            // (normal, face centre, in-plane axes and half extents), box frame
            let faces: [([f64; 3], [f64; 3], [f64; 3], f64, [f64; 3], f64); 6] = [
                ([1.0, 0.0, 0.0], [hl, 0.0, 0.0], [0.0, 1.0, 0.0], hw, [0.0, 0.0, 1.0], hh),
                ([-1.0, 0.0, 0.0], [-hl, 0.0, 0.0], [0.0, 1.0, 0.0], hw, [0.0, 0.0, 1.0], hh),
                ([0.0, 1.0, 0.0], [0.0, hw, 0.0], [1.0, 0.0, 0.0], hl, [0.0, 0.0, 1.0], hh),
                ([0.0, -1.0, 0.0], [0.0, -hw, 0.0], [1.0, 0.0, 0.0], hl, [0.0, 0.0, 1.0], hh),
                ([0.0, 0.0, 1.0], [0.0, 0.0, hh], [1.0, 0.0, 0.0], hl, [0.0, 1.0, 0.0], hw),
                ([0.0, 0.0, -1.0], [0.0, 0.0, -hh], [1.0, 0.0, 0.0], hl, [0.0, 1.0, 0.0], hw),
            ];
            for (n, fc, u, ue, v, ve) in faces {
                // visibility in the sensor frame: outward normal points back
                // toward the origin
                let n_w = [hc * n[0] - hs * n[1], hs * n[0] + hc * n[1], n[2]];
                let fc_w = to_world(fc);
                let dot = n_w[0] * fc_w[0] + n_w[1] * fc_w[1] + n_w[2] * fc_w[2];
                if dot >= 0.0 {
                    continue;
                }
                let area = 4.0 * ue * ve;
                let count = ((DENSITY * area / (obj.rho * obj.rho)).round() as usize).max(1);
                for _ in 0..count {
                    let a = rng.gen_range(-ue..ue);
                    let b = rng.gen_range(-ve..ve);
                    let p = [
                        fc[0] + a * u[0] + b * v[0],
                        fc[1] + a * u[1] + b * v[1],
                        fc[2] + a * u[2] + b * v[2],
                    ];
                    let w = to_world(p);
                    points.push(Point::new(w[0], w[1], w[2], refl));
                }
            }
        }
        Category::Pedestrian => {
            let radius = obj.width / 2.0;
            // sample the half of the cylinder side that faces the sensor
            let toward = (-center[1]).atan2(-center[0]);
            let area = std::f64::consts::PI * radius * obj.height; // half side
            let count = ((DENSITY * area / (obj.rho * obj.rho)).round() as usize).max(1);
            for _ in 0..count {
                let beta = toward + rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                let z = rng.gen_range(-obj.height / 2.0..obj.height / 2.0);
                points.push(Point::new(
                    center[0] + radius * beta.cos(),
                    center[1] + radius * beta.sin(),
                    center[2] + z,
                    refl,
                ));
            }
        }
    }
    Ok(PointCloud::new(points))
}
