//! Reverse-mode correctness: analytic cases, finite-difference oracles and
//! the contract around repeated backward calls.

use lidarseq_tensor::{attention, grad_check, Tensor, TensorError};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Tensor::randn(shape, &mut rng)
}

#[test]
fn sum_of_squares_gradient_is_2x_exactly() {
    let x = randn(&[2, 5], 1).trainable();
    let loss = x.sqr().sum_all();
    loss.backward().unwrap();
    let g = x.grad().unwrap();
    for (gi, xi) in g.iter().zip(x.to_vec()) {
        assert_eq!(*gi, 2.0 * xi);
    }
}

#[test]
fn second_backward_without_rerecording_errors() {
    let x = randn(&[3], 2).trainable();
    let loss = x.sqr().sum_all();
    loss.backward().unwrap();
    assert!(matches!(loss.backward(), Err(TensorError::Contract { .. })));
}

#[test]
fn non_scalar_loss_is_rejected() {
    let x = randn(&[3], 3).trainable();
    let y = x.sqr();
    assert!(matches!(y.backward(), Err(TensorError::Contract { .. })));
}

#[test]
fn attention_gradient_matches_finite_differences() {
    let x0 = randn(&[1, 2, 3], 4);
    let err = grad_check(
        |x| attention(x, x, x)?.sum_all().mean_all(),
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-5, "rel err {}", err);
}

#[test]
fn conv_groupnorm_chain_matches_finite_differences() {
    let x0 = randn(&[1, 2, 3, 4], 5);
    let w = randn(&[4, 2, 3, 3], 6);
    let b = randn(&[4], 7);
    let gamma = randn(&[4], 8);
    let beta = randn(&[4], 9);
    let err = grad_check(
        move |x| {
            x.conv2d_circular(&w, &b, 1)?
                .group_norm(2, &gamma, &beta)?
                .sum_all()
                .mean_all()
        },
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "rel err {}", err);
}

#[test]
fn conv_weight_and_bias_gradients_match_finite_differences() {
    let x = randn(&[1, 2, 3, 4], 10);
    let w0 = randn(&[3, 2, 3, 3], 11);
    let b0 = randn(&[3], 12);
    let err_w = grad_check(
        |w| x.conv2d_circular(w, &b0, 1)?.sqr().sum_all().mean_all(),
        &w0,
        1e-5,
    )
    .unwrap();
    assert!(err_w < 1e-4, "weight rel err {}", err_w);
    let err_b = grad_check(
        |b| x.conv2d_circular(&w0, b, 1)?.sqr().sum_all().mean_all(),
        &b0,
        1e-5,
    )
    .unwrap();
    assert!(err_b < 1e-6, "bias rel err {}", err_b);
}

#[test]
fn temporal_conv_gradients_match_finite_differences() {
    let x0 = randn(&[1, 2, 3, 2, 2], 13);
    let w = randn(&[2, 2, 3, 1, 1], 14);
    let b = randn(&[2], 15);
    let err = grad_check(
        |x| x.conv3d_temporal(&w, &b)?.sqr().sum_all().mean_all(),
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "rel err {}", err);
    let x = x0;
    let w0 = randn(&[2, 2, 3, 1, 1], 16);
    let err_w = grad_check(
        |w| x.conv3d_temporal(w, &b)?.sqr().sum_all().mean_all(),
        &w0,
        1e-5,
    )
    .unwrap();
    assert!(err_w < 1e-4, "weight rel err {}", err_w);
}

#[test]
fn composite_shape_ops_gradients_match_finite_differences() {
    // reshape -> permute -> narrow -> concat -> linear path
    let w = randn(&[3, 4], 17);
    let b = randn(&[3], 18);
    let x0 = randn(&[2, 2, 2], 19);
    let err = grad_check(
        |x| {
            let r = x.reshape(&[2, 4])?;
            let p = x.permute(&[1, 0, 2])?.reshape(&[2, 4])?;
            let both = Tensor::concat(0, &[&r, &p])?;
            let cut = both.narrow(0, 1, 3)?;
            cut.linear(&w, &b)?.silu().sqr().sum_all().mean_all()
        },
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {}", err);
}

#[test]
fn softmax_embedding_and_modulation_gradients() {
    let table0 = randn(&[5, 3], 20);
    let err_emb = grad_check(
        |table| {
            table
                .embedding(&[1, 4, 1])?
                .softmax_last()?
                .sqr()
                .sum_all()
                .mean_all()
        },
        &table0,
        1e-5,
    )
    .unwrap();
    assert!(err_emb < 1e-6, "embedding rel err {}", err_emb);

    let x0 = randn(&[2, 3, 4], 21);
    let scale = randn(&[2, 3], 22);
    let shift = randn(&[2, 3], 23);
    let err_mod = grad_check(
        |x| x.channel_affine(&scale, &shift)?.sqr().sum_all().mean_all(),
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(err_mod < 1e-6, "modulation rel err {}", err_mod);

    let s0 = randn(&[2, 3], 24);
    let x = randn(&[2, 3, 4], 25);
    let shift2 = randn(&[2, 3], 26);
    let err_scale = grad_check(
        |s| x.channel_affine(s, &shift2)?.sqr().sum_all().mean_all(),
        &s0,
        1e-5,
    )
    .unwrap();
    assert!(err_scale < 1e-6, "scale rel err {}", err_scale);
}

#[test]
fn upsample_and_blend_gradients() {
    let x0 = randn(&[1, 2, 2, 3], 27);
    let alpha = randn(&[], 28);
    let err = grad_check(
        |x| {
            let up = x.upsample_nearest2x()?;
            let a = alpha.sigmoid();
            let blended = up.mul_scalar_tensor(&a)?;
            blended.sqr().sum_all().mean_all()
        },
        &x0,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {}", err);

    let a0 = randn(&[], 29);
    let xs = randn(&[2, 4], 30);
    let xt = randn(&[2, 4], 31);
    let err_a = grad_check(
        |a| {
            let s = a.sigmoid();
            let diff = xs.sub(&xt)?;
            diff.mul_scalar_tensor(&s)?.add(&xt)?.sqr().sum_all().mean_all()
        },
        &a0,
        1e-5,
    )
    .unwrap();
    assert!(err_a < 1e-7, "alpha rel err {}", err_a);
}

#[test]
fn grad_check_linear_function_is_near_exact() {
    let x0 = randn(&[4], 32);
    let err = grad_check(|x| x.scale(3.5).sum_all().mean_all(), &x0, 1e-5).unwrap();
    assert!(err < 1e-9, "rel err {}", err);
}

#[test]
fn grad_check_quadratic_is_second_order_accurate() {
    let x0 = randn(&[4], 33);
    let err = grad_check(|x| x.sqr().sum_all().mean_all(), &x0, 1e-5).unwrap();
    assert!(err < 1e-7, "rel err {}", err);
}

#[test]
fn grad_check_skips_kinked_coordinates() {
    // relu has a kink at zero: plant a coordinate exactly on it
    let x0 = Tensor::from_vec(&[3], vec![0.0, 1.0, -2.0]).unwrap();
    let err = grad_check(|x| x.relu().sum_all().mean_all(), &x0, 1e-5).unwrap();
    // coordinates 1 and 2 are smooth and exact; coordinate 0 must be skipped
    assert!(err < 1e-9, "rel err {}", err);
}

#[test]
fn gradients_accumulate_across_shared_uses() {
    let x = randn(&[3], 34).trainable();
    // y = x*x via two uses of the same node: grad must be 2x
    let y = x.mul(&x).unwrap().sum_all();
    y.backward().unwrap();
    let g = x.grad().unwrap();
    for (gi, xi) in g.iter().zip(x.to_vec()) {
        assert!((gi - 2.0 * xi).abs() < 1e-12);
    }
}

#[test]
fn detached_inputs_receive_no_gradient() {
    let x = randn(&[3], 35).trainable();
    let frozen = x.detach();
    let y = x.mul(&frozen).unwrap().sum_all();
    y.backward().unwrap();
    // d/dx (x * const) = const
    let g = x.grad().unwrap();
    for (gi, fi) in g.iter().zip(frozen.to_vec()) {
        assert_eq!(*gi, fi);
    }
    assert!(frozen.grad().is_none());
}
