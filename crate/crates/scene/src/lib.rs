//! Procedural stand-in for a driving dataset: worlds with a road, static
//! props and moving agents; ray-cast LiDAR sweeps with ego motion; and the
//! per-sequence conditions (road sketch, caption tokens, object priors) with
//! ground-truth box annotations.
//!
//! Everything is a pure function of `(inputs, seed)`.

mod caption;
mod dataset;
mod object_prior;
mod raycast;
mod sequence;
mod validate;
mod world;

pub use caption::{derive_caption, token_id, token_name, VOCAB};
pub use dataset::{
    load_manifest, load_sample, sample_dir, write_manifest, write_sample, BoxRecord,
};
pub use object_prior::sample_object_prior;
pub use raycast::raycast_frame;
pub use sequence::{agent_condition, object_seed, simulate_sequence, SequenceSample};
pub use validate::{validate_sample, validate_world};
pub use world::synth_world;

use lidarseq_codec::CodecError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Tensor(#[from] lidarseq_tensor::TensorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset layout: {0}")]
    Layout(String),
}

pub type Result<T> = std::result::Result<T, SceneError>;

/// Simulation step between frames, seconds (2 Hz keyframe rate).
pub const FRAME_DT: f64 = 0.5;

/// Height of the sensor above the ground plane, meters.
pub const SENSOR_HEIGHT: f64 = 1.8;

/// Per-surface-class reflectance constants.
pub mod reflectance {
    pub const GROUND: f64 = 0.1;
    pub const BUILDING: f64 = 0.4;
    pub const TREE: f64 = 0.3;
    pub const VEHICLE: f64 = 0.6;
    pub const PEDESTRIAN: f64 = 0.5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Car,
    Truck,
    Pedestrian,
}

impl Category {
    pub fn dims(self) -> (f64, f64, f64) {
        match self {
            Category::Car => (4.5, 1.9, 1.6),
            Category::Truck => (7.0, 2.5, 3.0),
            Category::Pedestrian => (0.6, 0.6, 1.7),
        }
    }

    pub fn reflectance(self) -> f64 {
        match self {
            Category::Car | Category::Truck => reflectance::VEHICLE,
            Category::Pedestrian => reflectance::PEDESTRIAN,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Category::Car => "CAR",
            Category::Truck => "TRUCK",
            Category::Pedestrian => "PEDESTRIAN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOfDay {
    Day,
    Night,
    Dusk,
    Dawn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weather {
    Clear,
    Rain,
    Fog,
    Snow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundKind {
    Buildings,
    Trees,
    Grassy,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attributes {
    pub time_of_day: TimeOfDay,
    pub weather: Weather,
    pub background: BackgroundKind,
}

/// A moving agent on the ground plane. `center` is the box centre in world
/// coordinates at frame 0 (so `center[2] = h/2`); velocity is planar and
/// constant.
#[derive(Debug, Clone, Copy)]
pub struct Agent {
    pub category: Category,
    pub center: [f64; 3],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub heading: f64,
    pub velocity: [f64; 2],
}

impl Agent {
    pub fn center_at(&self, frame: usize) -> [f64; 3] {
        let t = frame as f64 * FRAME_DT;
        [self.center[0] + self.velocity[0] * t, self.center[1] + self.velocity[1] * t, self.center[2]]
    }

    /// Radius of the circumscribed circle of the footprint.
    pub fn footprint_radius(&self) -> f64 {
        0.5 * (self.length * self.length + self.width * self.width).sqrt()
    }
}

/// Axis-aligned building block sitting on the ground.
#[derive(Debug, Clone, Copy)]
pub struct Building {
    pub center: [f64; 2],
    pub half_extent: [f64; 2],
    pub height: f64,
}

/// Tree trunk/canopy approximated as a vertical cylinder.
#[derive(Debug, Clone, Copy)]
pub struct Tree {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

/// Ego pose on the ground plane.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub position: [f64; 2],
    pub yaw: f64,
}

/// A procedural world: a straight road along +x through the origin, static
/// props beyond the curbs, and constant-velocity agents on the road.
#[derive(Debug, Clone)]
pub struct SceneWorld {
    pub lane_half_width: f64,
    /// Curb and lane-line polylines on the ground plane (world frame).
    pub curbs: Vec<Vec<[f64; 2]>>,
    pub lane_lines: Vec<Vec<[f64; 2]>>,
    pub buildings: Vec<Building>,
    pub trees: Vec<Tree>,
    pub agents: Vec<Agent>,
    /// Ego start pose and constant forward speed along the road.
    pub ego_start: Pose,
    pub ego_speed: f64,
    pub attributes: Attributes,
    pub seed: u64,
}

impl SceneWorld {
    pub fn ego_pose(&self, frame: usize) -> Pose {
        let t = frame as f64 * FRAME_DT;
        Pose {
            position: [
                self.ego_start.position[0] + self.ego_speed * t,
                self.ego_start.position[1],
            ],
            yaw: self.ego_start.yaw,
        }
    }
}

/// Bounds and categorical weights for world synthesis.
#[derive(Debug, Clone)]
pub struct WorldParams {
    pub min_agents: usize,
    pub max_agents: usize,
    pub min_props: usize,
    pub max_props: usize,
    pub ego_speed_max: f64,
    pub time_weights: [f64; 4],
    pub weather_weights: [f64; 4],
    pub background_weights: [f64; 4],
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            min_agents: 1,
            max_agents: 4,
            min_props: 2,
            max_props: 10,
            ego_speed_max: 4.0,
            time_weights: [0.5, 0.2, 0.15, 0.15],
            weather_weights: [0.55, 0.2, 0.15, 0.1],
            background_weights: [0.3, 0.3, 0.2, 0.2],
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_agents > 8 {
            return Err(SceneError::Params(format!("max_agents = {} exceeds 8", self.max_agents)));
        }
        if self.max_props > 20 {
            return Err(SceneError::Params(format!("max_props = {} exceeds 20", self.max_props)));
        }
        if self.min_agents > self.max_agents || self.min_props > self.max_props {
            return Err(SceneError::Params("empty count range".into()));
        }
        if !(self.ego_speed_max >= 0.0 && self.ego_speed_max * FRAME_DT < 3.0) {
            return Err(SceneError::Params(format!(
                "ego speed {} m/s moves more than 3 m per frame",
                self.ego_speed_max
            )));
        }
        for w in [&self.time_weights, &self.weather_weights, &self.background_weights] {
            if w.iter().any(|&x| x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(SceneError::Params("weights must be nonnegative and sum > 0".into()));
            }
        }
        Ok(())
    }
}

/// Ground-truth box annotation for one agent in one frame, in the sensor
/// frame of that frame.
#[derive(Debug, Clone, Copy)]
pub struct BoxAnnotation {
    /// Stable per-world agent id (index into `SceneWorld::agents`).
    pub id: usize,
    pub frame: usize,
    pub category: Category,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub center: [f64; 3],
    pub heading: f64,
}

/// The polar-coordinate condition tuple for one object relative to the
/// sensor: category, extents, range, azimuth, elevation and heading.
#[derive(Debug, Clone, Copy)]
pub struct ObjectCondition {
    pub category: Category,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub rho: f64,
    pub theta: f64,
    pub phi: f64,
    pub heading: f64,
}

impl ObjectCondition {
    pub fn center(&self) -> [f64; 3] {
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        [self.rho * cp * ct, self.rho * cp * st, self.rho * sp]
    }

    pub fn from_center(
        category: Category,
        dims: (f64, f64, f64),
        center: [f64; 3],
        heading: f64,
    ) -> Self {
        let rho = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
        let theta = center[1].atan2(center[0]);
        let phi = if rho > 0.0 { (center[2] / rho).clamp(-1.0, 1.0).asin() } else { 0.0 };
        ObjectCondition {
            category,
            length: dims.0,
            width: dims.1,
            height: dims.2,
            rho,
            theta,
            phi,
            heading,
        }
    }
}
