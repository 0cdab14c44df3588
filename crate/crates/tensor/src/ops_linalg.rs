//! GEMM-backed operations: affine maps, batched matrix products, softmax and
//! scaled dot-product attention.

use crate::tensor::{dim_err, numel};
use crate::{Result, Scalar, Tensor};
use std::cell::RefCell;
use std::rc::Rc;

impl<T: Scalar> Tensor<T> {
    /// `y = x @ w^T + b` where `x` is `[..., D_in]`, `w` is `[D_out, D_in]`
    /// and `b` is `[D_out]`.
    pub fn linear(&self, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let xs = self.shape();
        let ws = w.shape();
        if xs.is_empty() || ws.len() != 2 || xs[xs.len() - 1] != ws[1] {
            return dim_err("linear", format!("x {:?} vs w {:?}", xs, ws));
        }
        let (d_out, d_in) = (ws[0], ws[1]);
        if b.shape() != [d_out] {
            return dim_err("linear", format!("bias {:?}, want [{}]", b.shape(), d_out));
        }
        let rows = self.len() / d_in;
        let mut data = vec![T::zero(); rows * d_out];
        b.with_data(|bias| {
            for r in 0..rows {
                data[r * d_out..(r + 1) * d_out].copy_from_slice(bias);
            }
        });
        self.with_data(|x| {
            w.with_data(|wd| {
                // out[r, o] += sum_i x[r, i] * w[o, i]
                T::gemm(
                    rows, d_in, d_out,
                    T::one(),
                    x, d_in as isize, 1,
                    wd, 1, d_in as isize,
                    T::one(),
                    &mut data, d_out as isize, 1,
                );
            })
        });
        let mut out_shape = xs.to_vec();
        *out_shape.last_mut().unwrap() = d_out;

        let x_rc = self.data_rc();
        let w_rc = w.data_rc();
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone(), w.clone(), b.clone()],
            Box::new(move |g| {
                let (x_data, w_data) = (x_rc.borrow(), w_rc.borrow());
                let mut gx = vec![T::zero(); rows * d_in];
                T::gemm(
                    rows, d_out, d_in,
                    T::one(),
                    g, d_out as isize, 1,
                    &w_data, d_in as isize, 1,
                    T::zero(),
                    &mut gx, d_in as isize, 1,
                );
                let mut gw = vec![T::zero(); d_out * d_in];
                T::gemm(
                    d_out, rows, d_in,
                    T::one(),
                    g, 1, d_out as isize,
                    &x_data, d_in as isize, 1,
                    T::zero(),
                    &mut gw, d_in as isize, 1,
                );
                let mut gb = vec![T::zero(); d_out];
                for r in 0..rows {
                    for o in 0..d_out {
                        gb[o] += g[r * d_out + o];
                    }
                }
                vec![Some(gx), Some(gw), Some(gb)]
            }),
        ))
    }

    /// Batched product `[N, L, K] @ [N, K, M] -> [N, L, M]`.
    pub fn bmm(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() != 3 || b.len() != 3 || a[0] != b[0] || a[2] != b[1] {
            return dim_err("bmm", format!("{:?} @ {:?}", a, b));
        }
        let (n, l, k, m) = (a[0], a[1], a[2], b[2]);
        let mut data = vec![T::zero(); n * l * m];
        self.with_data(|av| {
            other.with_data(|bv| {
                for i in 0..n {
                    T::gemm(
                        l, k, m,
                        T::one(),
                        &av[i * l * k..(i + 1) * l * k], k as isize, 1,
                        &bv[i * k * m..(i + 1) * k * m], m as isize, 1,
                        T::zero(),
                        &mut data[i * l * m..(i + 1) * l * m], m as isize, 1,
                    );
                }
            })
        });
        let a_rc = self.data_rc();
        let b_rc = other.data_rc();
        Ok(Tensor::from_op(
            vec![n, l, m],
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let (a_data, b_data) = (a_rc.borrow(), b_rc.borrow());
                let mut ga = vec![T::zero(); n * l * k];
                let mut gb = vec![T::zero(); n * k * m];
                for i in 0..n {
                    let gi = &g[i * l * m..(i + 1) * l * m];
                    // ga = g @ b^T
                    T::gemm(
                        l, m, k,
                        T::one(),
                        gi, m as isize, 1,
                        &b_data[i * k * m..(i + 1) * k * m], 1, m as isize,
                        T::zero(),
                        &mut ga[i * l * k..(i + 1) * l * k], k as isize, 1,
                    );
                    // gb = a^T @ g
                    T::gemm(
                        k, l, m,
                        T::one(),
                        &a_data[i * l * k..(i + 1) * l * k], 1, k as isize,
                        gi, m as isize, 1,
                        T::zero(),
                        &mut gb[i * k * m..(i + 1) * k * m], m as isize, 1,
                    );
                }
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// Batched product against the transpose: `[N, L, D] @ [N, M, D]^T -> [N, L, M]`.
    pub fn bmm_nt(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() != 3 || b.len() != 3 || a[0] != b[0] || a[2] != b[2] {
            return dim_err("bmm_nt", format!("{:?} @ {:?}^T", a, b));
        }
        let (n, l, d, m) = (a[0], a[1], a[2], b[1]);
        let mut data = vec![T::zero(); n * l * m];
        self.with_data(|av| {
            other.with_data(|bv| {
                for i in 0..n {
                    T::gemm(
                        l, d, m,
                        T::one(),
                        &av[i * l * d..(i + 1) * l * d], d as isize, 1,
                        &bv[i * m * d..(i + 1) * m * d], 1, d as isize,
                        T::zero(),
                        &mut data[i * l * m..(i + 1) * l * m], m as isize, 1,
                    );
                }
            })
        });
        let a_rc = self.data_rc();
        let b_rc = other.data_rc();
        Ok(Tensor::from_op(
            vec![n, l, m],
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let (a_data, b_data) = (a_rc.borrow(), b_rc.borrow());
                let mut ga = vec![T::zero(); n * l * d];
                let mut gb = vec![T::zero(); n * m * d];
                for i in 0..n {
                    let gi = &g[i * l * m..(i + 1) * l * m];
                    // ga = g @ b
                    T::gemm(
                        l, m, d,
                        T::one(),
                        gi, m as isize, 1,
                        &b_data[i * m * d..(i + 1) * m * d], d as isize, 1,
                        T::zero(),
                        &mut ga[i * l * d..(i + 1) * l * d], d as isize, 1,
                    );
                    // gb = g^T @ a
                    T::gemm(
                        m, l, d,
                        T::one(),
                        gi, 1, m as isize,
                        &a_data[i * l * d..(i + 1) * l * d], d as isize, 1,
                        T::zero(),
                        &mut gb[i * m * d..(i + 1) * m * d], d as isize, 1,
                    );
                }
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// Numerically shifted softmax over the last axis.
    pub fn softmax_last(&self) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        let Some(&cols) = shape.last() else {
            return dim_err("softmax_last", "scalar input");
        };
        if cols == 0 {
            return dim_err("softmax_last", "empty last axis");
        }
        let rows = self.len() / cols;
        let mut data = vec![T::zero(); self.len()];
        self.with_data(|x| {
            for r in 0..rows {
                let row = &x[r * cols..(r + 1) * cols];
                let m = row.iter().fold(row[0], |a, &b| a.max(b));
                let mut sum = T::zero();
                for (j, &v) in row.iter().enumerate() {
                    let e = (v - m).exp();
                    data[r * cols + j] = e;
                    sum += e;
                }
                for j in 0..cols {
                    data[r * cols + j] /= sum;
                }
            }
        });
        let out = Rc::new(RefCell::new(data));
        let y_rc = Rc::clone(&out);
        Ok(Tensor::from_op_shared(
            shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let y_data = y_rc.borrow();
                let mut gx = vec![T::zero(); g.len()];
                for r in 0..rows {
                    let y = &y_data[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let mut dot = T::zero();
                    for (gi, yi) in gr.iter().zip(y) {
                        dot += *gi * *yi;
                    }
                    for j in 0..cols {
                        gx[r * cols + j] = y[j] * (gr[j] - dot);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }
}

/// Scaled dot-product attention `softmax(q k^T / sqrt(D)) v` over
/// `q: [N, L, D]`, `k, v: [N, L', D]`.
///
/// Each output row is a convex combination of value rows; attention rows sum
/// to one by construction.
pub fn attention<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let (qs, ks, vs) = (q.shape(), k.shape(), v.shape());
    if qs.len() != 3 || ks.len() != 3 || vs.len() != 3 {
        return dim_err("attention", format!("q {:?}, k {:?}, v {:?}", qs, ks, vs));
    }
    if qs[2] != ks[2] {
        return dim_err("attention", format!("q depth {} vs k depth {}", qs[2], ks[2]));
    }
    if ks[0] != qs[0] || vs[0] != qs[0] || vs[1] != ks[1] {
        return dim_err("attention", format!("q {:?}, k {:?}, v {:?}", qs, ks, vs));
    }
    let d = qs[2];
    debug_assert!(numel(qs) > 0);
    let scores = q.bmm_nt(k)?.scale(1.0 / (d as f64).sqrt());
    let weights = scores.softmax_last()?;
    weights.bmm(v)
}
