//! `lidarseq synth`: generate a dataset of condition-annotated sequences.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use lidarseq_scene::{sample_dir, simulate_sequence, synth_world, write_manifest, write_sample};
use std::path::Path;

pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path, count: u64, seed: u64) -> Result<()> {
    let sensor = cfg.sensor.to_sensor();
    let params = cfg.world.to_params();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let seeds: Vec<u64> = (0..count).map(|i| seed + i).collect();
    for &s in &seeds {
        let world = synth_world(s, &params)?;
        let sample = simulate_sequence(&world, cfg.data.frames, &sensor)?;
        write_sample(&sample_dir(out_dir, s), &sample)
            .with_context(|| format!("writing sample {}", s))?;
    }
    write_manifest(out_dir, &seeds)?;
    cfg.echo_into(out_dir)?;
    println!(
        "synth: {} sequences of {} frames under {}",
        count,
        cfg.data.frames,
        out_dir.display()
    );
    Ok(())
}
