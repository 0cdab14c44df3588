//! Structured scene captions over a fixed vocabulary.
//!
//! A caption is `[time, weather, background, sorted agent categories...]`,
//! which is injective over distinct attribute tuples.

use crate::{BackgroundKind, Result, SceneError, SceneWorld, TimeOfDay, Weather};

pub const VOCAB: &[&str] = &[
    "PAD", "DAY", "NIGHT", "DUSK", "DAWN", "CLEAR", "RAIN", "FOG", "SNOW", "BUILDINGS", "TREES",
    "GRASSY", "MIXED", "CAR", "TRUCK", "PEDESTRIAN",
];

pub const MAX_CAPTION_LEN: usize = 16;

pub fn token_id(name: &str) -> Result<u32> {
    VOCAB
        .iter()
        .position(|t| *t == name)
        .map(|i| i as u32)
        .ok_or_else(|| SceneError::Validation(format!("unknown caption token '{}'", name)))
}

pub fn token_name(id: u32) -> Result<&'static str> {
    VOCAB
        .get(id as usize)
        .copied()
        .ok_or_else(|| SceneError::Validation(format!("token id {} outside vocabulary", id)))
}

fn time_token(t: TimeOfDay) -> &'static str {
    match t {
        TimeOfDay::Day => "DAY",
        TimeOfDay::Night => "NIGHT",
        TimeOfDay::Dusk => "DUSK",
        TimeOfDay::Dawn => "DAWN",
    }
}

fn weather_token(w: Weather) -> &'static str {
    match w {
        Weather::Clear => "CLEAR",
        Weather::Rain => "RAIN",
        Weather::Fog => "FOG",
        Weather::Snow => "SNOW",
    }
}

fn background_token(b: BackgroundKind) -> &'static str {
    match b {
        BackgroundKind::Buildings => "BUILDINGS",
        BackgroundKind::Trees => "TREES",
        BackgroundKind::Grassy => "GRASSY",
        BackgroundKind::Mixed => "MIXED",
    }
}

pub fn derive_caption(world: &SceneWorld) -> Vec<u32> {
    let mut names: Vec<&'static str> = vec![
        time_token(world.attributes.time_of_day),
        weather_token(world.attributes.weather),
        background_token(world.attributes.background),
    ];
    let mut cats: Vec<&'static str> = world.agents.iter().map(|a| a.category.token()).collect();
    cats.sort_unstable();
    names.extend(cats);
    names.truncate(MAX_CAPTION_LEN);
    names
        .into_iter()
        .map(|n| token_id(n).expect("vocabulary covers all generated tokens"))
        .collect()
}
