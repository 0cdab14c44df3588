//! Sequence simulation: advance the world frame by frame, cast sweeps and
//! derive the per-frame conditions plus annotations.

use crate::{
    derive_caption, raycast_frame, sample_object_prior, Agent, BoxAnnotation, ObjectCondition,
    Pose, Result, SceneError, SceneWorld, SENSOR_HEIGHT,
};
use lidarseq_codec::{
    project, render_object_prior, render_road_sketch, EquirectImage, OrientedBox, PointCloud,
    Polyline, SensorConfig,
};
use lidarseq_tensor::Tensor;

/// One F-frame training sample: range images, pixel-aligned conditions, the
/// caption and ground-truth boxes, all tied to the generating seed.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    pub frames: Vec<EquirectImage>,
    pub sketches: Vec<Tensor<f32>>,
    pub priors: Vec<Tensor<f32>>,
    pub caption: Vec<u32>,
    pub boxes: Vec<BoxAnnotation>,
    pub seed: u64,
}

impl SequenceSample {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Deterministic per-object sampling stream derived from the world seed and
/// the agent id, shared by synthesis and the edit workflow.
pub fn object_seed(world_seed: u64, agent_id: usize) -> u64 {
    let mut z = world_seed ^ (agent_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn to_sensor_frame(p: [f64; 3], pose: &Pose) -> [f64; 3] {
    let (s, c) = (pose.yaw.sin(), pose.yaw.cos());
    let dx = p[0] - pose.position[0];
    let dy = p[1] - pose.position[1];
    let dz = p[2] - SENSOR_HEIGHT;
    [c * dx + s * dy, -s * dx + c * dy, dz]
}

/// The condition tuple of an agent as seen from `pose` at `frame`.
pub fn agent_condition(agent: &Agent, pose: &Pose, frame: usize) -> ObjectCondition {
    let center = to_sensor_frame(agent.center_at(frame), pose);
    ObjectCondition::from_center(
        agent.category,
        (agent.length, agent.width, agent.height),
        center,
        agent.heading - pose.yaw,
    )
}

fn ground_polyline_to_sensor(line: &[[f64; 2]], pose: &Pose) -> Polyline {
    Polyline::new(
        line.iter()
            .map(|p| to_sensor_frame([p[0], p[1], 0.0], pose))
            .collect(),
    )
}

/// Simulate `frames` sweeps. Agents advance at constant velocity, the ego
/// along its trajectory, both at the fixed frame step. Agents beyond `d_max`
/// in a frame are omitted from that frame's annotations and conditions.
pub fn simulate_sequence(
    world: &SceneWorld,
    frames: usize,
    cfg: &SensorConfig,
) -> Result<SequenceSample> {
    if frames == 0 {
        return Err(SceneError::Params("need at least one frame".into()));
    }
    cfg.validate()?;
    let mut out = SequenceSample {
        frames: Vec::with_capacity(frames),
        sketches: Vec::with_capacity(frames),
        priors: Vec::with_capacity(frames),
        caption: derive_caption(world),
        boxes: Vec::new(),
        seed: world.seed,
    };
    for f in 0..frames {
        let pose = world.ego_pose(f);
        let cloud = raycast_frame(world, &pose, cfg, f);
        out.frames.push(project(&cloud, cfg)?);

        let mut annotations: Vec<BoxAnnotation> = Vec::new();
        for (id, agent) in world.agents.iter().enumerate() {
            let cond = agent_condition(agent, &pose, f);
            if cond.rho > cfg.d_max {
                continue;
            }
            annotations.push(BoxAnnotation {
                id,
                frame: f,
                category: agent.category,
                length: agent.length,
                width: agent.width,
                height: agent.height,
                center: cond.center(),
                heading: cond.heading,
            });
        }

        let layout: Vec<Polyline> = world
            .curbs
            .iter()
            .chain(world.lane_lines.iter())
            .map(|l| ground_polyline_to_sensor(l, &pose))
            .collect();
        let boxes: Vec<OrientedBox> = annotations
            .iter()
            .map(|a| OrientedBox {
                center: a.center,
                length: a.length,
                width: a.width,
                height: a.height,
                heading: a.heading,
            })
            .collect();
        out.sketches.push(render_road_sketch(&layout, &boxes, cfg)?);

        let mut object_points = PointCloud::default();
        for a in &annotations {
            let cond = agent_condition(&world.agents[a.id], &pose, f);
            let pc = sample_object_prior(&cond, object_seed(world.seed, a.id), cfg.d_max)?;
            object_points.points.extend(pc.points);
        }
        out.priors.push(render_object_prior(&object_points, cfg)?);

        out.boxes.extend(annotations);
    }
    Ok(out)
}
