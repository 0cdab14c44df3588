//! World synthesis: road, props, agents, attributes, all from one seed.

use crate::{
    Agent, Attributes, BackgroundKind, Building, Category, Pose, Result, SceneError, SceneWorld,
    TimeOfDay, Tree, Weather, WorldParams, FRAME_DT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const ROAD_EXTENT: f64 = 80.0;
const REJECTION_LIMIT: usize = 1000;

fn pick<T: Copy>(rng: &mut ChaCha12Rng, options: &[T], weights: &[f64]) -> T {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (o, w) in options.iter().zip(weights) {
        if u < *w {
            return *o;
        }
        u -= w;
    }
    *options.last().expect("non-empty options")
}

pub fn synth_world(seed: u64, params: &WorldParams) -> Result<SceneWorld> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let attributes = Attributes {
        time_of_day: pick(
            &mut rng,
            &[TimeOfDay::Day, TimeOfDay::Night, TimeOfDay::Dusk, TimeOfDay::Dawn],
            &params.time_weights,
        ),
        weather: pick(
            &mut rng,
            &[Weather::Clear, Weather::Rain, Weather::Fog, Weather::Snow],
            &params.weather_weights,
        ),
        background: pick(
            &mut rng,
            &[
                BackgroundKind::Buildings,
                BackgroundKind::Trees,
                BackgroundKind::Grassy,
                BackgroundKind::Mixed,
            ],
            &params.background_weights,
        ),
    };

    let lane_half_width = rng.gen_range(3.2..5.0);
    let curbs = vec![
        vec![[-ROAD_EXTENT, lane_half_width], [ROAD_EXTENT, lane_half_width]],
        vec![[-ROAD_EXTENT, -lane_half_width], [ROAD_EXTENT, -lane_half_width]],
    ];
    let lane_lines = vec![vec![[-ROAD_EXTENT, 0.0], [ROAD_EXTENT, 0.0]]];

    let ego_speed = rng.gen_range(0.0..params.ego_speed_max);
    let ego_start = Pose { position: [0.0, -lane_half_width / 2.0], yaw: 0.0 };

    // Props go in side bands beyond the curbs; the background kind steers
    // the building/tree mix (grassy keeps the sides mostly open).
    let n_props = rng.gen_range(params.min_props..=params.max_props);
    let mut buildings = Vec::new();
    let mut trees = Vec::new();
    for _ in 0..n_props {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let x = rng.gen_range(-60.0..60.0);
        let tree_prob = match attributes.background {
            BackgroundKind::Buildings => 0.15,
            BackgroundKind::Trees => 0.85,
            BackgroundKind::Grassy => 0.5,
            BackgroundKind::Mixed => 0.5,
        };
        let keep_prob = if attributes.background == BackgroundKind::Grassy { 0.3 } else { 1.0 };
        let as_tree = rng.gen_bool(tree_prob);
        let keep = rng.gen_bool(keep_prob);
        if !keep {
            continue;
        }
        if as_tree {
            let y = side * rng.gen_range(lane_half_width + 1.5..lane_half_width + 12.0);
            trees.push(Tree {
                center: [x, y],
                radius: rng.gen_range(0.3..0.8),
                height: rng.gen_range(3.0..8.0),
            });
        } else {
            let hx = rng.gen_range(3.0..7.5);
            let hy = rng.gen_range(3.0..7.5);
            let y = side * (lane_half_width + hy + rng.gen_range(2.0..10.0));
            buildings.push(Building {
                center: [x, y],
                half_extent: [hx, hy],
                height: rng.gen_range(5.0..20.0),
            });
        }
    }

    // Agents on the road, rejection-sampled against mutual overlap and the
    // ego start position.
    let n_agents = rng.gen_range(params.min_agents..=params.max_agents);
    let mut agents: Vec<Agent> = Vec::new();
    let ego_radius = 2.5;
    for _ in 0..n_agents {
        let mut placed = false;
        for _attempt in 0..REJECTION_LIMIT {
            let category = pick(
                &mut rng,
                &[Category::Car, Category::Truck, Category::Pedestrian],
                &[0.6, 0.2, 0.2],
            );
            let (l, w, h) = category.dims();
            let (center, heading, speed) = match category {
                Category::Pedestrian => {
                    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let c = [
                        rng.gen_range(-35.0..35.0),
                        side * rng.gen_range(lane_half_width * 0.55..lane_half_width * 0.95),
                    ];
                    (c, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI), rng.gen_range(0.0..1.5))
                }
                _ => {
                    let dir = if rng.gen_bool(0.5) { 0.0 } else { std::f64::consts::PI };
                    let lane_y = if dir == 0.0 { -lane_half_width / 2.0 } else { lane_half_width / 2.0 };
                    let c = [rng.gen_range(-40.0..40.0), lane_y + rng.gen_range(-0.4..0.4)];
                    (c, dir, rng.gen_range(0.0..8.0))
                }
            };
            let candidate = Agent {
                category,
                center: [center[0], center[1], h / 2.0],
                length: l,
                width: w,
                height: h,
                heading,
                velocity: [speed * heading.cos(), speed * heading.sin()],
            };
            let r = candidate.footprint_radius();
            let clear_of_agents = agents.iter().all(|a| {
                let dx = a.center[0] - candidate.center[0];
                let dy = a.center[1] - candidate.center[1];
                (dx * dx + dy * dy).sqrt() > r + a.footprint_radius()
            });
            let dex = candidate.center[0] - ego_start.position[0];
            let dey = candidate.center[1] - ego_start.position[1];
            let clear_of_ego = (dex * dex + dey * dey).sqrt() > r + ego_radius;
            if clear_of_agents && clear_of_ego {
                agents.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SceneError::Generation(format!(
                "could not place agent without overlap after {} attempts (seed {})",
                REJECTION_LIMIT, seed
            )));
        }
    }

    let world = SceneWorld {
        lane_half_width,
        curbs,
        lane_lines,
        buildings,
        trees,
        agents,
        ego_start,
        ego_speed,
        attributes,
        seed,
    };
    debug_assert!(world.ego_speed * FRAME_DT < 3.0);
    Ok(world)
}
