//! Rough single-core conv throughput probe (not part of the test suite).
use lidarseq_tensor::Tensor;
use rand::SeedableRng;
use std::time::Instant;

fn main() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
    // scale-0 workload of the tiny training config
    let x = Tensor::<f32>::randn(&[4, 32, 32, 128], &mut rng).trainable();
    let w = Tensor::<f32>::randn(&[16, 32, 3, 3], &mut rng).trainable();
    let b = Tensor::<f32>::randn(&[16], &mut rng).trainable();
    let reps = 30;
    let t0 = Instant::now();
    for _ in 0..reps {
        let y = x.conv2d_circular(&w, &b, 1).unwrap();
        let loss = y.sqr().sum_all();
        loss.backward().unwrap();
        x.zero_grad(); w.zero_grad(); b.zero_grad();
    }
    let dt = t0.elapsed().as_secs_f64() / reps as f64;
    let macs = 4.0 * 32.0 * 128.0 * 16.0 * 32.0 * 9.0; // fwd
    println!("fwd+bwd: {:.1} ms/iter, fwd-only {:.2} GMAC -> eff {:.1} GFLOP/s (counting 3x fwd)",
        dt * 1e3, macs / 1e9, 3.0 * 2.0 * macs / dt / 1e9);
}
