//! Convolutions for equirectangular sequences.
//!
//! Width padding is circular (a 360° azimuth sweep wraps), height padding is
//! zero (elevation does not wrap). Both forward and backward lower onto the
//! shared GEMM so accumulation order over the reduction axis is fixed.

use crate::tensor::{config_err, dim_err};
use crate::{Result, Scalar, Tensor};

struct Conv2dGeom {
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    oh: usize,
    ow: usize,
}

impl Conv2dGeom {
    fn ckk(&self) -> usize {
        self.c * self.kh * self.kw
    }
}

/// Copy `dst[oj] = src[(oj*stride + start) mod w]`. The wrapped index walks
/// at most once around, so two plain segment loops cover it.
fn gather_wrapped<T: Scalar>(dst: &mut [T], src: &[T], start: usize, stride: usize) {
    let w = src.len();
    if stride == 1 {
        let head = w - start;
        dst[..head].copy_from_slice(&src[start..]);
        dst[head..].copy_from_slice(&src[..start]);
    } else {
        let n1 = (w - start).div_ceil(stride).min(dst.len());
        for (oj, dv) in dst[..n1].iter_mut().enumerate() {
            *dv = src[start + stride * oj];
        }
        for (oj, dv) in dst[n1..].iter_mut().enumerate() {
            *dv = src[start + stride * (n1 + oj) - w];
        }
    }
}

/// Scatter-add counterpart of [`gather_wrapped`].
fn scatter_add_wrapped<T: Scalar>(dst: &mut [T], src: &[T], start: usize, stride: usize) {
    let w = dst.len();
    if stride == 1 {
        let head = w - start;
        for (d, s) in dst[start..].iter_mut().zip(&src[..head]) {
            *d += *s;
        }
        for (d, s) in dst[..start].iter_mut().zip(&src[head..]) {
            *d += *s;
        }
    } else {
        let n1 = (w - start).div_ceil(stride).min(src.len());
        for (oj, sv) in src[..n1].iter().enumerate() {
            dst[start + stride * oj] += *sv;
        }
        for (oj, sv) in src[n1..].iter().enumerate() {
            dst[start + stride * (n1 + oj) - w] += *sv;
        }
    }
}

/// Gather one batch item into a `[C*kh*kw, OH*OW]` patch matrix.
/// Height out-of-range reads are zero, width wraps modulo `W`.
fn im2col<T: Scalar>(x: &[T], g: &Conv2dGeom, col: &mut [T]) {
    let (h, w, oh, ow) = (g.h, g.w, g.oh, g.ow);
    let pad_h = g.kh / 2;
    let half_kw = g.kw as isize / 2;
    debug_assert_eq!(col.len(), g.ckk() * oh * ow);
    let mut row = 0usize;
    for c in 0..g.c {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let start = (kj as isize - half_kw).rem_euclid(w as isize) as usize;
                let dst = &mut col[row * oh * ow..(row + 1) * oh * ow];
                for oi in 0..oh {
                    let ii = (oi * g.stride + ki) as isize - pad_h as isize;
                    let dst_row = &mut dst[oi * ow..(oi + 1) * ow];
                    if ii < 0 || ii >= h as isize {
                        dst_row.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src_row = &plane[ii as usize * w..(ii as usize + 1) * w];
                    gather_wrapped(dst_row, src_row, start, g.stride);
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add the patch-matrix gradient back into an input gradient plane.
fn col2im_add<T: Scalar>(colg: &[T], g: &Conv2dGeom, gx: &mut [T]) {
    let (h, w, oh, ow) = (g.h, g.w, g.oh, g.ow);
    let pad_h = g.kh / 2;
    let half_kw = g.kw as isize / 2;
    let mut row = 0usize;
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let start = (kj as isize - half_kw).rem_euclid(w as isize) as usize;
                let src = &colg[row * oh * ow..(row + 1) * oh * ow];
                for oi in 0..oh {
                    let ii = (oi * g.stride + ki) as isize - pad_h as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let dst_row = &mut gx[c * h * w + ii as usize * w..c * h * w + (ii as usize + 1) * w];
                    scatter_add_wrapped(dst_row, &src[oi * ow..(oi + 1) * ow], start, g.stride);
                }
                row += 1;
            }
        }
    }
}

impl<T: Scalar> Tensor<T> {
    /// 2D convolution of `x: [B, C, H, W]` with `w: [O, C, kh, kw]` and bias
    /// `[O]`. Width padding is circular, height padding is zero. `stride` is
    /// 1 (shape-preserving) or 2 (downsampling; H and W must be even).
    ///
    /// Output column `j` depends on input columns `j*stride - kw/2 ..
    /// j*stride + kw/2` taken modulo `W`, so a cyclic column shift of the
    /// input cyclically shifts the output, bit-exact.
    pub fn conv2d_circular(&self, w: &Tensor<T>, b: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
        let xs = self.shape();
        let ws = w.shape();
        if xs.len() != 4 || ws.len() != 4 {
            return dim_err("conv2d_circular", format!("x {:?}, w {:?}", xs, ws));
        }
        if ws[1] != xs[1] {
            return dim_err(
                "conv2d_circular",
                format!("input has {} channels, kernel expects {}", xs[1], ws[1]),
            );
        }
        if ws[3] % 2 == 0 || ws[2] % 2 == 0 {
            return config_err("conv2d_circular", format!("kernel {}x{} must be odd", ws[2], ws[3]));
        }
        if stride != 1 && stride != 2 {
            return config_err("conv2d_circular", format!("stride {} unsupported", stride));
        }
        if stride == 2 && (xs[2] % 2 != 0 || xs[3] % 2 != 0) {
            return config_err("conv2d_circular", format!("stride 2 needs even H,W, got {:?}", xs));
        }
        if b.shape() != [ws[0]] {
            return dim_err("conv2d_circular", format!("bias {:?}, want [{}]", b.shape(), ws[0]));
        }
        let batch = xs[0];
        let geom = Conv2dGeom {
            c: xs[1],
            h: xs[2],
            w: xs[3],
            o: ws[0],
            kh: ws[2],
            kw: ws[3],
            stride,
            oh: xs[2] / stride,
            ow: xs[3] / stride,
        };
        let (oh, ow, o, ckk) = (geom.oh, geom.ow, geom.o, geom.ckk());
        let plane = oh * ow;
        let mut data = vec![T::zero(); batch * o * plane];
        let mut col = vec![T::zero(); ckk * plane];
        self.with_data(|x| {
            w.with_data(|wd| {
                b.with_data(|bd| {
                    for bi in 0..batch {
                        im2col(&x[bi * geom.c * geom.h * geom.w..], &geom, &mut col);
                        let out = &mut data[bi * o * plane..(bi + 1) * o * plane];
                        for oc in 0..o {
                            out[oc * plane..(oc + 1) * plane].iter_mut().for_each(|v| *v = bd[oc]);
                        }
                        T::gemm(
                            o, ckk, plane,
                            T::one(),
                            wd, ckk as isize, 1,
                            &col, plane as isize, 1,
                            T::one(),
                            out, plane as isize, 1,
                        );
                    }
                })
            })
        });

        let x_rc = self.data_rc();
        let w_rc = w.data_rc();
        Ok(Tensor::from_op(
            vec![batch, o, oh, ow],
            data,
            vec![self.clone(), w.clone(), b.clone()],
            Box::new(move |g| {
                let (x_data, w_data) = (x_rc.borrow(), w_rc.borrow());
                let in_plane = geom.c * geom.h * geom.w;
                let mut gx = vec![T::zero(); batch * in_plane];
                let mut gw = vec![T::zero(); o * ckk];
                let mut gb = vec![T::zero(); o];
                let mut col = vec![T::zero(); ckk * plane];
                let mut colg = vec![T::zero(); ckk * plane];
                for bi in 0..batch {
                    let gout = &g[bi * o * plane..(bi + 1) * o * plane];
                    // bias: plain row sums
                    for oc in 0..o {
                        for &v in &gout[oc * plane..(oc + 1) * plane] {
                            gb[oc] += v;
                        }
                    }
                    // weights: g @ col^T, accumulated across the batch
                    im2col(&x_data[bi * in_plane..], &geom, &mut col);
                    T::gemm(
                        o, plane, ckk,
                        T::one(),
                        gout, plane as isize, 1,
                        &col, 1, plane as isize,
                        T::one(),
                        &mut gw, ckk as isize, 1,
                    );
                    // input: w^T @ g, then scatter back through the patch map
                    T::gemm(
                        ckk, o, plane,
                        T::one(),
                        &w_data, 1, ckk as isize,
                        gout, plane as isize, 1,
                        T::zero(),
                        &mut colg, plane as isize, 1,
                    );
                    col2im_add(&colg, &geom, &mut gx[bi * in_plane..(bi + 1) * in_plane]);
                }
                vec![Some(gx), Some(gw), Some(gb)]
            }),
        ))
    }

    /// Temporal convolution of `x: [B, C, F, H, W]` with a fixed `(3, 1, 1)`
    /// kernel `w: [O, C, 3, 1, 1]` and bias `[O]`. Frame padding is zero on
    /// both ends, so frame `f` of the output depends exactly on frames
    /// `f-1, f, f+1` of the input.
    pub fn conv3d_temporal(&self, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let xs = self.shape();
        let ws = w.shape();
        if xs.len() != 5 || ws.len() != 5 {
            return dim_err("conv3d_temporal", format!("x {:?}, w {:?}", xs, ws));
        }
        if ws[2..] != [3, 1, 1] {
            return config_err(
                "conv3d_temporal",
                format!("kernel extents {:?} must be (3,1,1)", &ws[2..]),
            );
        }
        if ws[1] != xs[1] {
            return dim_err(
                "conv3d_temporal",
                format!("input has {} channels, kernel expects {}", xs[1], ws[1]),
            );
        }
        if b.shape() != [ws[0]] {
            return dim_err("conv3d_temporal", format!("bias {:?}, want [{}]", b.shape(), ws[0]));
        }
        let (batch, c, frames, h, wd_) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
        let o = ws[0];
        let hw = h * wd_;
        let mut data = vec![T::zero(); batch * o * frames * hw];
        self.with_data(|x| {
            w.with_data(|wv| {
                b.with_data(|bv| {
                    for bi in 0..batch {
                        let xin = &x[bi * c * frames * hw..(bi + 1) * c * frames * hw];
                        let out = &mut data[bi * o * frames * hw..(bi + 1) * o * frames * hw];
                        for f in 0..frames {
                            for oc in 0..o {
                                out[(oc * frames + f) * hw..(oc * frames + f + 1) * hw]
                                    .iter_mut()
                                    .for_each(|v| *v = bv[oc]);
                            }
                            for (d, off) in [(0usize, -1isize), (1, 0), (2, 1)] {
                                let fi = f as isize + off;
                                if fi < 0 || fi >= frames as isize {
                                    continue;
                                }
                                // out[:, f] += W_d @ x[:, fi] over the [C, HW] slice
                                T::gemm(
                                    o, c, hw,
                                    T::one(),
                                    &wv[d..], 3 * c as isize, 3,
                                    &xin[fi as usize * hw..], (frames * hw) as isize, 1,
                                    T::one(),
                                    &mut out[f * hw..], (frames * hw) as isize, 1,
                                );
                            }
                        }
                    }
                })
            })
        });

        let x_rc = self.data_rc();
        let w_rc = w.data_rc();
        Ok(Tensor::from_op(
            vec![batch, o, frames, h, wd_],
            data,
            vec![self.clone(), w.clone(), b.clone()],
            Box::new(move |g| {
                let (x_data, w_data) = (x_rc.borrow(), w_rc.borrow());
                let mut gx = vec![T::zero(); batch * c * frames * hw];
                let mut gw = vec![T::zero(); o * c * 3];
                let mut gb = vec![T::zero(); o];
                for bi in 0..batch {
                    let gout = &g[bi * o * frames * hw..(bi + 1) * o * frames * hw];
                    let xin = &x_data[bi * c * frames * hw..(bi + 1) * c * frames * hw];
                    let gxin = &mut gx[bi * c * frames * hw..(bi + 1) * c * frames * hw];
                    for oc in 0..o {
                        for &v in &gout[oc * frames * hw..(oc + 1) * frames * hw] {
                            gb[oc] += v;
                        }
                    }
                    for f in 0..frames {
                        for (d, off) in [(0usize, -1isize), (1, 0), (2, 1)] {
                            let fi = f as isize + off;
                            if fi < 0 || fi >= frames as isize {
                                continue;
                            }
                            // gw[:, :, d] += g[:, f] @ x[:, fi]^T
                            T::gemm(
                                o, hw, c,
                                T::one(),
                                &gout[f * hw..], (frames * hw) as isize, 1,
                                &xin[fi as usize * hw..], 1, (frames * hw) as isize,
                                T::one(),
                                &mut gw[d..], 3 * c as isize, 3,
                            );
                            // gx[:, fi] += W_d^T @ g[:, f]
                            T::gemm(
                                c, o, hw,
                                T::one(),
                                &w_data[d..], 3, 3 * c as isize,
                                &gout[f * hw..], (frames * hw) as isize, 1,
                                T::one(),
                                &mut gxin[fi as usize * hw..], (frames * hw) as isize, 1,
                            );
                        }
                    }
                }
                // restore [O, C, 3, 1, 1] layout for the weight gradient
                vec![Some(gx), Some(gw), Some(gb)]
            }),
        ))
    }
}
