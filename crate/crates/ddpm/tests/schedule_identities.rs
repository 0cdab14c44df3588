//! Dense-grid and randomized identities of the schedule, the transition
//! algebra and the forward/reverse composition.

use lidarseq_ddpm::{
    forward_diffuse, posterior_step, sample, schedule_at, transition_params, SamplerConfig,
};
use lidarseq_tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[test]
fn alpha_sigma_pythagorean_identity_on_dense_grid() {
    for k in 0..=10_000 {
        let t = k as f64 / 10_000.0;
        let (a, s) = schedule_at(t).unwrap();
        assert!((a * a + s * s - 1.0).abs() <= 1e-12, "t = {}", t);
    }
}

#[test]
fn transition_identities_on_random_triples() {
    let mut rng = ChaCha12Rng::seed_from_u64(100);
    for _ in 0..10_000 {
        let mut v = [rng.gen_range(1e-6..1.0 - 1e-6), 0.0, 0.0];
        v[1] = rng.gen_range(v[0]..1.0 - 1e-9);
        v[2] = rng.gen_range(v[1]..1.0);
        let (s, u, t) = (v[0], v[1], v[2]);
        if s >= u || u >= t {
            continue;
        }
        let (a_ts, s2_ts) = transition_params(s, t).unwrap();
        let (a_us, s2_us) = transition_params(s, u).unwrap();
        let (a_tu, s2_tu) = transition_params(u, t).unwrap();
        let (alpha_s, sigma_s) = schedule_at(s).unwrap();
        let (alpha_t, sigma_t) = schedule_at(t).unwrap();
        // telescoping of the ratio
        assert!((a_tu * a_us - a_ts).abs() <= 1e-12);
        // variance decomposition against the marginal
        assert!((a_ts * a_ts * sigma_s * sigma_s + s2_ts - sigma_t * sigma_t).abs() <= 1e-12);
        assert!((a_ts * alpha_s - alpha_t).abs() <= 1e-12);
        // two-hop variance composition: sigma2(t|s) via u
        let composed = a_tu * a_tu * s2_us + s2_tu;
        assert!((composed - s2_ts).abs() <= 1e-12, "{} vs {}", composed, s2_ts);
    }
}

#[test]
fn monte_carlo_composition_matches_direct_marginal() {
    // q(x_s | x) then q(x_t | x_s) must equal q(x_t | x) in distribution;
    // check mean/variance over 1e5 scalar draws within 3 standard errors
    let (s, t) = (0.35, 0.8);
    let x0 = 0.6f64;
    let n = 100_000usize;
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let (alpha_s, sigma_s) = schedule_at(s).unwrap();
    let (alpha_t, sigma_t) = schedule_at(t).unwrap();
    let (a_ts, s2_ts) = transition_params(s, t).unwrap();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let e1: f64 = rng.sample(rand_distr::StandardNormal);
        let e2: f64 = rng.sample(rand_distr::StandardNormal);
        let x_s = alpha_s * x0 + sigma_s * e1;
        let x_t = a_ts * x_s + s2_ts.sqrt() * e2;
        sum += x_t;
        sumsq += x_t * x_t;
    }
    let mean = sum / n as f64;
    let var = sumsq / n as f64 - mean * mean;
    let want_mean = alpha_t * x0;
    let want_var = sigma_t * sigma_t;
    // standard errors of the estimators
    let se_mean = want_var.sqrt() / (n as f64).sqrt();
    let se_var = want_var * (2.0 / n as f64).sqrt();
    assert!(
        (mean - want_mean).abs() < 3.0 * se_mean,
        "mean {} vs {} (se {})",
        mean,
        want_mean,
        se_mean
    );
    assert!(
        (var - want_var).abs() < 3.0 * se_var,
        "var {} vs {} (se {})",
        var,
        want_var,
        se_var
    );
}

#[test]
fn posterior_composition_of_tensors_matches_marginal_moments() {
    // push a constant tensor through forward_diffuse / posterior_step pairs
    // and verify the recomposed forward marginal empirically
    let (s, t) = (0.25, 0.6);
    let n = 20_000usize;
    let x = Tensor::<f64>::full(&[n], 0.3);
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let e1 = Tensor::<f64>::randn(&[n], &mut rng);
    let x_s = forward_diffuse(&x, s, &e1).unwrap();
    let (a_ts, s2_ts) = transition_params(s, t).unwrap();
    let e2 = Tensor::<f64>::randn(&[n], &mut rng);
    let x_t: Vec<f64> = x_s
        .scale(a_ts)
        .add(&e2.scale(s2_ts.sqrt()))
        .unwrap()
        .to_vec();
    let (alpha_t, sigma_t) = schedule_at(t).unwrap();
    let mean: f64 = x_t.iter().sum::<f64>() / n as f64;
    let var: f64 = x_t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    assert!((mean - alpha_t * 0.3).abs() < 3.0 * sigma_t / (n as f64).sqrt());
    assert!((var - sigma_t * sigma_t).abs() < 3.0 * sigma_t * sigma_t * (2.0 / n as f64).sqrt());
}

#[test]
fn oracle_sampler_inversion_at_256_steps() {
    // acceptance-sized check: [1, 2, 2, 16, 64] target recovered to 1e-3
    let shape = [1usize, 2, 2, 16, 64];
    let mut rng = ChaCha12Rng::seed_from_u64(33);
    let target = Tensor::<f32>::randn(&shape, &mut rng).clamp(-1.0, 1.0).detach();
    let t_clone = target.clone();
    let cfg = SamplerConfig { steps: 256, seed: 12, t_floor: 1e-4 };
    let out = sample(
        move |x_t: &Tensor<f32>, t: f64| {
            let (alpha, sigma) = schedule_at(t)?;
            Ok(x_t.sub(&t_clone.scale(alpha))?.scale(1.0 / sigma.max(1e-12)))
        },
        &shape,
        &cfg,
    )
    .unwrap();
    let max_err = out
        .to_vec()
        .iter()
        .zip(target.to_vec())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(max_err < 1e-3, "max abs err {}", max_err);
}

#[test]
fn posterior_with_zero_s_returns_xhat_for_arbitrary_noise() {
    let mut rng = ChaCha12Rng::seed_from_u64(50);
    let x_t = Tensor::<f64>::randn(&[16], &mut rng);
    let x_hat = Tensor::<f64>::randn(&[16], &mut rng);
    let noise = Tensor::<f64>::randn(&[16], &mut rng);
    let out = posterior_step(&x_t, &x_hat, 0.0, 1.0 / 256.0, &noise).unwrap();
    assert_eq!(out.to_vec(), x_hat.to_vec());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn forward_eps_inversion_round_trip(t in 1e-4f64..0.9999, seed in any::<u64>()) {
        use lidarseq_ddpm::eps_to_x;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let x = Tensor::<f64>::randn(&[8], &mut rng);
        let eps = Tensor::<f64>::randn(&[8], &mut rng);
        let x_t = forward_diffuse(&x, t, &eps).unwrap();
        let back = eps_to_x(&x_t, &eps, t, 1e-4).unwrap();
        let (alpha, _) = schedule_at(t).unwrap();
        if alpha >= 1e-4 {
            for (a, b) in back.to_vec().iter().zip(x.to_vec()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
