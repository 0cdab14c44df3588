//! Workflow-level contracts: deterministic synthesis and sampling,
//! bit-identical training resume, and the edit render-diff oracle.

use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_lidarseq");

fn tiny_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    let base = r#"
[sensor]
h = 16
w = 64

[model]
scales = 3
base_c = 8
fourier_k = 2
heads = 4
blocks_per_scale = 1
t_emb_dim = 32
caption_dim = 32

[train]
batch = 1
ckpt_every = 3
log_every = 1

[sampler]
steps = 4

[data]
frames = 2
"#;
    std::fs::write(&path, format!("{}{}", base, extra)).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}\n{}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn synth_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "synth",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--count",
            "2",
            "--seed",
            "3",
        ]);
    }
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    for seed in ["3", "4"] {
        assert_eq!(dir_bytes(&a.join(seed)), dir_bytes(&b.join(seed)), "seed {} differs", seed);
    }
    // config echoed into the output
    assert!(a.join("run.toml").exists());
}

#[test]
fn train_resume_continues_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let data = tmp.path().join("data");
    run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--count",
        "2",
        "--seed",
        "0",
    ]);
    // one shot: 6 steps
    let full = tmp.path().join("full");
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        full.to_str().unwrap(),
        "--max-steps",
        "6",
    ]);
    // split: 3 steps, then resume to 6
    let split = tmp.path().join("split");
    for _ in 0..2 {
        run_ok(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            split.to_str().unwrap(),
            "--max-steps",
            "3",
        ]);
        // second run resumes from ckpt_3/latest and stops immediately; bump
        // the cap by rewriting the arg on the next loop instead
        break;
    }
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        split.to_str().unwrap(),
        "--max-steps",
        "6",
    ]);

    // the final parameter files must be bit-identical
    let full_params = dir_bytes(&full.join("latest").join("params"));
    let split_params = dir_bytes(&split.join("latest").join("params"));
    assert_eq!(full_params.len(), split_params.len());
    for ((na, da), (nb, db)) in full_params.iter().zip(&split_params) {
        assert_eq!(na, nb);
        assert_eq!(da, db, "parameter {} differs after resume", na);
    }
    // and the loss log lines for steps 4..6 match the one-shot run
    let log_full = std::fs::read_to_string(full.join("train.log")).unwrap();
    let log_split = std::fs::read_to_string(split.join("train.log")).unwrap();
    for step in 4..=6 {
        let find = |log: &str| {
            log.lines()
                .find(|l| l.starts_with(&format!("step {} ", step)))
                .map(|l| {
                    // elapsed time is wall clock; compare the loss fields
                    l.split(" elapsed_s").next().unwrap().to_string()
                })
                .unwrap_or_else(|| panic!("no log line for step {}", step))
        };
        assert_eq!(find(&log_full), find(&log_split), "log diverged at step {}", step);
    }
}

#[test]
fn sampling_is_deterministic_and_in_range() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let data = tmp.path().join("data");
    run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--count",
        "1",
        "--seed",
        "0",
    ]);
    let run_dir = tmp.path().join("run");
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--max-steps",
        "3",
    ]);
    let ckpt = run_dir.join("latest");
    let (g1, g2) = (tmp.path().join("g1"), tmp.path().join("g2"));
    for out in [&g1, &g2] {
        run_ok(&[
            "sample",
            "--config",
            cfg.to_str().unwrap(),
            "--ckpt",
            ckpt.to_str().unwrap(),
            "--conditions",
            data.join("0").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "11",
        ]);
    }
    for k in 0..2 {
        let name = format!("frame_{}.l4dt", k);
        assert_eq!(
            std::fs::read(g1.join(&name)).unwrap(),
            std::fs::read(g2.join(&name)).unwrap(),
            "{} not bit-identical",
            name
        );
        // decoded clouds respect the codec contract
        let cloud = lidarseq_codec::load_cloud_ply(g1.join(format!("cloud_{}.ply", k))).unwrap();
        for p in &cloud.points {
            assert!(p.range() <= 80.0 + 1e-3);
        }
    }
    // output frame count equals condition frame count
    assert!(g1.join("frame_1.l4dt").exists() && !g1.join("frame_2.l4dt").exists());
}

#[test]
fn checkpoint_topology_mismatch_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let data = tmp.path().join("data");
    run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--count",
        "1",
        "--seed",
        "0",
    ]);
    let run_dir = tmp.path().join("run");
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--max-steps",
        "1",
    ]);
    // conditions at a different resolution
    let cfg2 = {
        let p = tmp.path().join("other.toml");
        std::fs::write(
            &p,
            "[sensor]\nh = 32\nw = 128\n\n[data]\nframes = 2\n",
        )
        .unwrap();
        p
    };
    let data2 = tmp.path().join("data2");
    run_ok(&[
        "synth",
        "--config",
        cfg2.to_str().unwrap(),
        "--out",
        data2.to_str().unwrap(),
        "--count",
        "1",
        "--seed",
        "0",
    ]);
    let out = run(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--ckpt",
        run_dir.join("latest").to_str().unwrap(),
        "--conditions",
        data2.join("0").to_str().unwrap(),
        "--out",
        tmp.path().join("gen").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("config mismatch"), "unexpected error: {}", msg);
}

#[test]
fn eval_exit_codes_follow_ingestion_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let data = tmp.path().join("data");
    run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--count",
        "3",
        "--seed",
        "0",
    ]);
    let report = tmp.path().join("metrics.txt");
    run_ok(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--gen",
        data.to_str().unwrap(),
        "--ref",
        data.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("extractor_seed=7"));
    assert!(text.contains("NOT comparable"));
    for key in ["mmd_e4=", "jsd=", "frd=", "fvd="] {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        let v: f64 = line.split('=').nth(1).unwrap().parse().unwrap();
        assert!(v.abs() < 1e-3, "{} should be ~0 for gen == ref, got {}", key, v);
    }
    // broken layout -> nonzero exit
    let out = run(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--gen",
        tmp.path().join("nonexistent").to_str().unwrap(),
        "--ref",
        data.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}
