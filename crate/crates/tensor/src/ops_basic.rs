//! Elementwise, reduction and shape-shuffling operations.

use crate::tensor::{contract_err, dim_err, numel};
use crate::{Result, Scalar, Tensor};
use std::cell::RefCell;
use std::rc::Rc;

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return dim_err(op, format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    fn unary(
        &self,
        f: impl Fn(T) -> T,
        // (x, y) -> dy/dx
        df: impl Fn(T, T) -> T + 'static,
    ) -> Tensor<T> {
        let data: Vec<T> = self.with_data(|x| x.iter().map(|&v| f(v)).collect());
        let out = Rc::new(RefCell::new(data));
        let x_rc = self.data_rc();
        let y_rc = Rc::clone(&out);
        Tensor::from_op_shared(
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let x = x_rc.borrow();
                let y = y_rc.borrow();
                let gx = g
                    .iter()
                    .zip(x.iter().zip(y.iter()))
                    .map(|(&gi, (&xi, &yi))| gi * df(xi, yi))
                    .collect();
                vec![Some(gx)]
            }),
        )
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("add", self, other)?;
        let data = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(&x, &y)| x + y).collect()));
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g| vec![Some(g.to_vec()), Some(g.to_vec())]),
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("sub", self, other)?;
        let data = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(&x, &y)| x - y).collect()));
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                vec![Some(g.to_vec()), Some(g.iter().map(|&v| -v).collect())]
            }),
        ))
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("mul", self, other)?;
        let data = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(&x, &y)| x * y).collect()));
        let a_rc = self.data_rc();
        let b_rc = other.data_rc();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let (a, b) = (a_rc.borrow(), b_rc.borrow());
                let ga = g.iter().zip(b.iter()).map(|(&gi, &bi)| gi * bi).collect();
                let gb = g.iter().zip(a.iter()).map(|(&gi, &ai)| gi * ai).collect();
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    pub fn neg(&self) -> Tensor<T> {
        self.unary(|x| -x, |_, _| -T::one())
    }

    pub fn scale(&self, c: f64) -> Tensor<T> {
        let c = T::from_f64(c);
        self.unary(move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<T> {
        let c = T::from_f64(c);
        self.unary(move |x| x + c, |_, _| T::one())
    }

    pub fn sqr(&self) -> Tensor<T> {
        let two = T::from_f64(2.0);
        self.unary(|x| x * x, move |x, _| two * x)
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary(sigmoid_scalar, |_, y| y * (T::one() - y))
    }

    pub fn silu(&self) -> Tensor<T> {
        self.unary(
            |x| x * sigmoid_scalar(x),
            |x, _| {
                let s = sigmoid_scalar(x);
                s * (T::one() + x * (T::one() - s))
            },
        )
    }

    pub fn relu(&self) -> Tensor<T> {
        self.unary(
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    /// Clamp into `[lo, hi]`; gradient passes only through unclipped elements.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor<T> {
        let lo = T::from_f64(lo);
        let hi = T::from_f64(hi);
        self.unary(
            move |x| x.max(lo).min(hi),
            move |x, _| if x >= lo && x <= hi { T::one() } else { T::zero() },
        )
    }

    pub fn sum_all(&self) -> Tensor<T> {
        let mut acc = T::zero();
        self.with_data(|x| {
            for &v in x {
                acc += v;
            }
        });
        let n = self.len();
        Tensor::from_op(
            vec![],
            vec![acc],
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean_all(&self) -> Result<Tensor<T>> {
        if self.is_empty() {
            return contract_err("mean_all", "empty tensor");
        }
        let inv = 1.0 / self.len() as f64;
        Ok(self.sum_all().scale(inv))
    }

    /// Multiply by a scalar-shaped tensor (broadcast), e.g. a learnable blend
    /// weight.
    pub fn mul_scalar_tensor(&self, s: &Tensor<T>) -> Result<Tensor<T>> {
        if s.len() != 1 {
            return dim_err("mul_scalar_tensor", format!("scalar operand has shape {:?}", s.shape()));
        }
        let sv = s.item()?;
        let data = self.with_data(|x| x.iter().map(|&v| v * sv).collect());
        let x_rc = self.data_rc();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), s.clone()],
            Box::new(move |g| {
                let x = x_rc.borrow();
                let gx = g.iter().map(|&gi| gi * sv).collect();
                let mut gs = T::zero();
                for (gi, xi) in g.iter().zip(x.iter()) {
                    gs += *gi * *xi;
                }
                vec![Some(gx), Some(vec![gs])]
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.len() {
            return dim_err(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape(), shape),
            );
        }
        Ok(Tensor::view_op(
            shape.to_vec(),
            self.clone(),
            Box::new(move |g| vec![Some(g.to_vec())]),
        ))
    }

    /// Reorder axes; `perm[d]` names the source axis that lands at axis `d`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor<T>> {
        let nd = self.shape().len();
        let mut seen = vec![false; nd];
        if perm.len() != nd || perm.iter().any(|&p| p >= nd || std::mem::replace(&mut seen[p], true)) {
            return dim_err("permute", format!("{:?} is not a permutation of {} axes", perm, nd));
        }
        let src_shape = self.shape().to_vec();
        let dst_shape: Vec<usize> = perm.iter().map(|&p| src_shape[p]).collect();
        let data = self.with_data(|x| permute_copy(x, &src_shape, perm));
        let perm_owned = perm.to_vec();
        let dst_shape_bw = dst_shape.clone();
        Ok(Tensor::from_op(
            dst_shape,
            data,
            vec![self.clone()],
            Box::new(move |g| {
                // inverse permutation maps dst axes back to src axes
                let mut inv = vec![0usize; perm_owned.len()];
                for (d, &p) in perm_owned.iter().enumerate() {
                    inv[p] = d;
                }
                vec![Some(permute_copy(g, &dst_shape_bw, &inv))]
            }),
        ))
    }

    /// Concatenate along `axis`; all other extents must agree.
    pub fn concat(axis: usize, parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        if parts.is_empty() {
            return contract_err("concat", "no tensors given");
        }
        let base = parts[0].shape().to_vec();
        if axis >= base.len() {
            return dim_err("concat", format!("axis {} of {:?}", axis, base));
        }
        let mut axis_total = 0;
        for p in parts {
            let s = p.shape();
            if s.len() != base.len()
                || s.iter().zip(&base).enumerate().any(|(d, (a, b))| d != axis && a != b)
            {
                return dim_err("concat", format!("{:?} vs {:?} along axis {}", s, base, axis));
            }
            axis_total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = axis_total;

        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = vec![T::zero(); outer * axis_total * inner];
        let mut offset = 0;
        let mut extents = Vec::with_capacity(parts.len());
        for p in parts {
            let ext = p.shape()[axis];
            p.with_data(|x| {
                for o in 0..outer {
                    let src = &x[o * ext * inner..(o + 1) * ext * inner];
                    let dst_start = (o * axis_total + offset) * inner;
                    data[dst_start..dst_start + ext * inner].copy_from_slice(src);
                }
            });
            offset += ext;
            extents.push(ext);
        }

        let parents: Vec<Tensor<T>> = parts.iter().map(|p| (*p).clone()).collect();
        Ok(Tensor::from_op(
            out_shape,
            data,
            parents,
            Box::new(move |g| {
                let mut grads = Vec::with_capacity(extents.len());
                let mut offset = 0;
                for &ext in &extents {
                    let mut gp = vec![T::zero(); outer * ext * inner];
                    for o in 0..outer {
                        let src_start = (o * axis_total + offset) * inner;
                        gp[o * ext * inner..(o + 1) * ext * inner]
                            .copy_from_slice(&g[src_start..src_start + ext * inner]);
                    }
                    grads.push(Some(gp));
                    offset += ext;
                }
                grads
            }),
        ))
    }

    /// Contiguous slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return dim_err(
                "narrow",
                format!("[{}, {}) along axis {} of {:?}", start, start + len, axis, shape),
            );
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let ext = shape[axis];
        let mut data = vec![T::zero(); outer * len * inner];
        self.with_data(|x| {
            for o in 0..outer {
                let src_start = (o * ext + start) * inner;
                data[o * len * inner..(o + 1) * len * inner]
                    .copy_from_slice(&x[src_start..src_start + len * inner]);
            }
        });
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gp = vec![T::zero(); outer * ext * inner];
                for o in 0..outer {
                    let dst_start = (o * ext + start) * inner;
                    gp[dst_start..dst_start + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gp)]
            }),
        ))
    }

    /// `[B, ...] -> [B*reps, ...]` with `out[b*reps + r] = in[b]`.
    pub fn repeat_interleave0(&self, reps: usize) -> Result<Tensor<T>> {
        let shape = self.shape();
        if shape.is_empty() || reps == 0 {
            return dim_err("repeat_interleave0", format!("shape {:?}, reps {}", shape, reps));
        }
        let b = shape[0];
        let row = self.len() / b;
        let mut data = vec![T::zero(); self.len() * reps];
        self.with_data(|x| {
            for i in 0..b {
                for r in 0..reps {
                    data[(i * reps + r) * row..(i * reps + r + 1) * row]
                        .copy_from_slice(&x[i * row..(i + 1) * row]);
                }
            }
        });
        let mut out_shape = shape.to_vec();
        out_shape[0] = b * reps;
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gp = vec![T::zero(); b * row];
                for i in 0..b {
                    for r in 0..reps {
                        let src = &g[(i * reps + r) * row..(i * reps + r + 1) * row];
                        for (a, s) in gp[i * row..(i + 1) * row].iter_mut().zip(src) {
                            *a += *s;
                        }
                    }
                }
                vec![Some(gp)]
            }),
        ))
    }

    /// Prepend a broadcast batch axis: `[...] -> [n, ...]`.
    pub fn broadcast0(&self, n: usize) -> Result<Tensor<T>> {
        if n == 0 {
            return dim_err("broadcast0", "n must be positive");
        }
        let row = self.len();
        let mut data = vec![T::zero(); row * n];
        self.with_data(|x| {
            for i in 0..n {
                data[i * row..(i + 1) * row].copy_from_slice(x);
            }
        });
        let mut out_shape = vec![n];
        out_shape.extend_from_slice(self.shape());
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gp = vec![T::zero(); row];
                for i in 0..n {
                    for (a, s) in gp.iter_mut().zip(&g[i * row..(i + 1) * row]) {
                        *a += *s;
                    }
                }
                vec![Some(gp)]
            }),
        ))
    }

    /// Per-channel modulation `y = x * (1 + scale) + shift` for `x[N, C, ...]`
    /// with `scale`, `shift` of shape `[N, C]`.
    pub fn channel_affine(&self, scale: &Tensor<T>, shift: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if shape.len() < 2 {
            return dim_err("channel_affine", format!("input shape {:?}", shape));
        }
        let (n, c) = (shape[0], shape[1]);
        if scale.shape() != [n, c] || shift.shape() != [n, c] {
            return dim_err(
                "channel_affine",
                format!(
                    "scale {:?} / shift {:?} vs input {:?}",
                    scale.shape(),
                    shift.shape(),
                    shape
                ),
            );
        }
        let spatial = self.len() / (n * c);
        let sc = scale.to_vec();
        let sh = shift.to_vec();
        let mut data = vec![T::zero(); self.len()];
        self.with_data(|x| {
            for nc in 0..n * c {
                let a = T::one() + sc[nc];
                let b = sh[nc];
                for s in 0..spatial {
                    data[nc * spatial + s] = x[nc * spatial + s] * a + b;
                }
            }
        });
        let x_rc = self.data_rc();
        Ok(Tensor::from_op(
            shape,
            data,
            vec![self.clone(), scale.clone(), shift.clone()],
            Box::new(move |g| {
                let x = x_rc.borrow();
                let mut gx = vec![T::zero(); x.len()];
                let mut gscale = vec![T::zero(); n * c];
                let mut gshift = vec![T::zero(); n * c];
                for nc in 0..n * c {
                    let a = T::one() + sc[nc];
                    let mut acc_scale = T::zero();
                    let mut acc_shift = T::zero();
                    for s in 0..spatial {
                        let gi = g[nc * spatial + s];
                        gx[nc * spatial + s] = gi * a;
                        acc_scale += gi * x[nc * spatial + s];
                        acc_shift += gi;
                    }
                    gscale[nc] = acc_scale;
                    gshift[nc] = acc_shift;
                }
                vec![Some(gx), Some(gscale), Some(gshift)]
            }),
        ))
    }

    /// Nearest-neighbour 2x upsampling of `[N, C, H, W]`.
    pub fn upsample_nearest2x(&self) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if shape.len() != 4 {
            return dim_err("upsample_nearest2x", format!("expected [N,C,H,W], got {:?}", shape));
        }
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let (oh, ow) = (h * 2, w * 2);
        let mut data = vec![T::zero(); n * c * oh * ow];
        self.with_data(|x| {
            for nc in 0..n * c {
                for i in 0..oh {
                    let src_row = &x[nc * h * w + (i / 2) * w..nc * h * w + (i / 2) * w + w];
                    let dst_row = &mut data[nc * oh * ow + i * ow..nc * oh * ow + (i + 1) * ow];
                    for j in 0..ow {
                        dst_row[j] = src_row[j / 2];
                    }
                }
            }
        });
        Ok(Tensor::from_op(
            vec![n, c, oh, ow],
            data,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gp = vec![T::zero(); n * c * h * w];
                for nc in 0..n * c {
                    for i in 0..oh {
                        for j in 0..ow {
                            gp[nc * h * w + (i / 2) * w + j / 2] += g[nc * oh * ow + i * ow + j];
                        }
                    }
                }
                vec![Some(gp)]
            }),
        ))
    }

    /// Row lookup into an embedding table `self[V, D]`.
    pub fn embedding(&self, ids: &[usize]) -> Result<Tensor<T>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return dim_err("embedding", format!("table must be [V,D], got {:?}", shape));
        }
        let (v, d) = (shape[0], shape[1]);
        if let Some(&bad) = ids.iter().find(|&&id| id >= v) {
            return contract_err("embedding", format!("token id {} outside vocabulary of {}", bad, v));
        }
        let mut data = vec![T::zero(); ids.len() * d];
        self.with_data(|table| {
            for (row, &id) in ids.iter().enumerate() {
                data[row * d..(row + 1) * d].copy_from_slice(&table[id * d..(id + 1) * d]);
            }
        });
        let ids_owned = ids.to_vec();
        Ok(Tensor::from_op(
            vec![ids.len(), d],
            data,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gt = vec![T::zero(); v * d];
                for (row, &id) in ids_owned.iter().enumerate() {
                    for j in 0..d {
                        gt[id * d + j] += g[row * d + j];
                    }
                }
                vec![Some(gt)]
            }),
        ))
    }
}

fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    // Split on sign to avoid exp overflow on large negatives.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn permute_copy<T: Scalar>(src: &[T], src_shape: &[usize], perm: &[usize]) -> Vec<T> {
    let nd = src_shape.len();
    let mut src_strides = vec![1usize; nd];
    for d in (0..nd.saturating_sub(1)).rev() {
        src_strides[d] = src_strides[d + 1] * src_shape[d + 1];
    }
    let dst_shape: Vec<usize> = perm.iter().map(|&p| src_shape[p]).collect();
    let dst_src_stride: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let mut out = vec![T::default(); src.len()];
    let mut idx = vec![0usize; nd];
    let mut src_off = 0usize;
    for slot in out.iter_mut() {
        *slot = src[src_off];
        // odometer increment over dst index space
        for d in (0..nd).rev() {
            idx[d] += 1;
            src_off += dst_src_stride[d];
            if idx[d] < dst_shape[d] {
                break;
            }
            src_off -= dst_src_stride[d] * dst_shape[d];
            idx[d] = 0;
        }
    }
    out
}
