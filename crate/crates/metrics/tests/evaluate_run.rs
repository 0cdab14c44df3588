//! Dataset-level metric behaviour on synthetic scenes: zero identities,
//! baseline separation against pure noise and the corruption sweep.

use lidarseq_metrics::{evaluate_run, EvalConfig, EvalReport};
use lidarseq_scene::{
    sample_dir, simulate_sequence, synth_world, write_manifest, write_sample, SequenceSample,
    WorldParams,
};
use lidarseq_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::Path;

fn synth_set(root: &Path, seeds: &[u64], frames: usize) {
    let cfg = lidarseq_codec::SensorConfig::default();
    let params = WorldParams::default();
    for &seed in seeds {
        let world = synth_world(seed, &params).unwrap();
        let sample = simulate_sequence(&world, frames, &cfg).unwrap();
        write_sample(&sample_dir(root, seed), &sample).unwrap();
    }
    write_manifest(root, seeds).unwrap();
}

/// Corrupt every frame of every sample with additive Gaussian noise of the
/// given amplitude (clamped back into [-1, 1]).
fn corrupt_set(src: &Path, dst: &Path, seeds: &[u64], amplitude: f64, rng_seed: u64) {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    for &seed in seeds {
        let sample = lidarseq_scene::load_sample(&sample_dir(src, seed)).unwrap();
        let noisy = SequenceSample {
            frames: sample
                .frames
                .iter()
                .map(|img| {
                    let t = img.channels();
                    let mut data = t.to_vec();
                    for v in data.iter_mut() {
                        *v = (*v as f64 + amplitude * rng.sample::<f64, _>(rand_distr::StandardNormal))
                            .clamp(-1.0, 1.0) as f32;
                    }
                    let noisy_t = Tensor::from_vec(t.shape(), data).unwrap();
                    lidarseq_codec::EquirectImage::from_tensor_threshold(&noisy_t, -0.999).unwrap()
                })
                .collect(),
            ..sample
        };
        write_sample(&sample_dir(dst, seed), &noisy).unwrap();
    }
    write_manifest(dst, seeds).unwrap();
}

fn noise_set(root: &Path, like: &EvalConfig, seeds: &[u64], frames: usize) {
    let mut rng = ChaCha12Rng::seed_from_u64(999);
    let (h, w) = (like.sensor.h, like.sensor.w);
    for &seed in seeds {
        let sample = SequenceSample {
            frames: (0..frames)
                .map(|_| {
                    let t = Tensor::<f32>::randn(&[2, h, w], &mut rng).clamp(-1.0, 1.0);
                    lidarseq_codec::EquirectImage::from_tensor_threshold(&t.detach(), -0.999).unwrap()
                })
                .collect(),
            sketches: (0..frames).map(|_| Tensor::zeros(&[2, h, w])).collect(),
            priors: (0..frames).map(|_| Tensor::full(&[2, h, w], -1.0)).collect(),
            caption: vec![1, 5, 9],
            boxes: Vec::new(),
            seed,
        };
        write_sample(&sample_dir(root, seed), &sample).unwrap();
    }
    write_manifest(root, seeds).unwrap();
}

fn assert_close_to_zero(report: &EvalReport) {
    assert!(report.mmd_e4.abs() < 1e-6, "mmd {}", report.mmd_e4);
    assert!(report.jsd.abs() < 1e-9, "jsd {}", report.jsd);
    assert!(report.frd.abs() < 1e-4, "frd {}", report.frd);
    assert!(report.fvd.abs() < 1e-4, "fvd {}", report.fvd);
}

#[test]
fn identical_directories_score_zero_on_all_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ref");
    synth_set(&root, &[1, 2, 3, 4], 5);
    let cfg = EvalConfig::default();
    let report = evaluate_run(&root, &root, &cfg).unwrap();
    assert_close_to_zero(&report);
    assert_eq!(report.n_gen, 4);
    let text = report.render();
    assert!(text.contains("NOT comparable"));
    assert!(text.contains("extractor_seed=7"));
}

#[test]
fn pure_noise_scores_worse_than_held_out_reference() {
    let dir = tempfile::tempdir().unwrap();
    let ref_a = dir.path().join("ref_a");
    let ref_b = dir.path().join("ref_b");
    let noise = dir.path().join("noise");
    synth_set(&ref_a, &[10, 11, 12, 13], 5);
    synth_set(&ref_b, &[20, 21, 22, 23], 5);
    let cfg = EvalConfig::default();
    noise_set(&noise, &cfg, &[30, 31, 32, 33], 5);

    let baseline = evaluate_run(&ref_b, &ref_a, &cfg).unwrap();
    let vs_noise = evaluate_run(&noise, &ref_a, &cfg).unwrap();
    assert!(vs_noise.mmd_e4 > baseline.mmd_e4, "{} vs {}", vs_noise.mmd_e4, baseline.mmd_e4);
    assert!(vs_noise.jsd > baseline.jsd, "{} vs {}", vs_noise.jsd, baseline.jsd);
    assert!(vs_noise.frd > baseline.frd, "{} vs {}", vs_noise.frd, baseline.frd);
    assert!(vs_noise.fvd > baseline.fvd, "{} vs {}", vs_noise.fvd, baseline.fvd);
}

#[test]
fn corruption_sweep_is_monotone_for_every_metric() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ref");
    let seeds = [40u64, 41, 42, 43];
    synth_set(&root, &seeds, 5);
    let cfg = EvalConfig::default();
    let mut last = EvalReport {
        mmd_e4: 0.0,
        jsd: 0.0,
        frd: 0.0,
        fvd: 0.0,
        n_gen: 0,
        n_ref: 0,
        extractor_seed: 0,
    };
    for (level, amplitude) in [0.05, 0.12, 0.3, 0.7].iter().enumerate() {
        let out = dir.path().join(format!("corrupt{}", level));
        corrupt_set(&root, &out, &seeds, *amplitude, 77);
        let report = evaluate_run(&out, &root, &cfg).unwrap();
        assert!(
            report.mmd_e4 >= last.mmd_e4
                && report.jsd >= last.jsd
                && report.frd >= last.frd
                && report.fvd >= last.fvd,
            "level {} not monotone: {:?} after {:?}",
            level,
            report,
            last
        );
        last = report;
    }
    assert!(last.frd > 0.0 && last.jsd > 0.0);
}

#[test]
fn missing_layout_is_an_ingestion_error() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ref");
    synth_set(&root, &[50, 51], 2);
    // break one sample
    std::fs::remove_file(sample_dir(&root, 51).join("sketch_1.l4dt")).unwrap();
    let cfg = EvalConfig::default();
    let err = evaluate_run(&root, &root, &cfg).unwrap_err();
    let msg = format!("{}", err);
    assert!(msg.contains("51"), "error should list the broken dir: {}", msg);
}
