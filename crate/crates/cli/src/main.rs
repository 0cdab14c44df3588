//! Sequential LiDAR scene generation pipeline: synthesize datasets, train
//! the noise predictor, sample conditioned sequences, edit conditions and
//! evaluate generation quality.

mod batch;
mod config;
mod edit;
mod evalcmd;
mod sample;
mod synth;
mod train;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::{resolve_path, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "lidarseq", version, about = "Sequential LiDAR scene generation pipeline")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted. Flags override
    /// config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a dataset of condition-annotated LiDAR sequences.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Frames per sequence (overrides [data].frames).
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Train the noise predictor on a synthesized dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Generate a sequence from a checkpoint under a condition bundle.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        conditions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Apply an edit script to a sample's conditions.
    Edit {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a generated dataset against a reference dataset.
    Eval {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        extractor_seed: Option<u64>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {:#}", e);
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(&resolve_path(path))?,
        None => RunConfig::default(),
    };
    match cli.cmd {
        Cmd::Synth { out, count, seed, frames } => {
            if let Some(f) = frames {
                cfg.data.frames = f;
            }
            synth::cmd_synth(&cfg, &resolve_path(&out), count, seed)
        }
        Cmd::Train { data, out, max_steps, seed, lr, batch } => {
            if let Some(v) = max_steps {
                cfg.train.max_steps = v;
            }
            if let Some(v) = seed {
                cfg.train.seed = v;
            }
            if let Some(v) = lr {
                cfg.train.lr = v;
            }
            if let Some(v) = batch {
                cfg.train.batch = v;
            }
            train::cmd_train(&cfg, &resolve_path(&data), &resolve_path(&out))
        }
        Cmd::Sample { ckpt, conditions, out, seed, steps } => {
            if let Some(v) = seed {
                cfg.sampler.seed = v;
            }
            if let Some(v) = steps {
                cfg.sampler.steps = v;
            }
            sample::cmd_sample(
                &cfg,
                &resolve_path(&ckpt),
                &resolve_path(&conditions),
                &resolve_path(&out),
            )
        }
        Cmd::Edit { sample, script, out } => edit::cmd_edit(
            &resolve_path(&sample),
            &resolve_path(&script),
            &resolve_path(&out),
            &cfg.sensor.to_sensor(),
        ),
        Cmd::Eval { gen, reference, out, extractor_seed } => {
            let mut eval_cfg = lidarseq_metrics::EvalConfig {
                sensor: cfg.sensor.to_sensor(),
                decode_threshold: cfg.sampler.decode_threshold as f32,
                ..Default::default()
            };
            if let Some(s) = extractor_seed {
                eval_cfg.extractor_seed = s;
            }
            evalcmd::cmd_eval(
                &resolve_path(&gen),
                &resolve_path(&reference),
                &resolve_path(&out),
                &eval_cfg,
            )
        }
    }
}
