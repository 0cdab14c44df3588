//! Group normalization over `[B, C, ...]` with per-channel affine.
//!
//! Statistics accumulate in f64 regardless of the element type: the group
//! reductions are then stable enough that permuting pixels (e.g. a cyclic
//! column shift) leaves the f32 results bit-identical, which the
//! architecture's equivariance tests rely on.

use crate::tensor::{config_err, dim_err};
use crate::{Result, Scalar, Tensor};

const EPS: f64 = 1e-5;

impl<T: Scalar> Tensor<T> {
    /// Normalize each of `groups` channel groups to zero mean / unit variance
    /// (biased variance, epsilon 1e-5), then apply `y = gamma * xhat + beta`.
    pub fn group_norm(&self, groups: usize, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if shape.len() < 2 {
            return dim_err("group_norm", format!("input shape {:?}", shape));
        }
        let (b, c) = (shape[0], shape[1]);
        if groups == 0 || c % groups != 0 {
            return config_err("group_norm", format!("{} channels not divisible by {} groups", c, groups));
        }
        if gamma.shape() != [c] || beta.shape() != [c] {
            return dim_err(
                "group_norm",
                format!("gamma {:?} / beta {:?}, want [{}]", gamma.shape(), beta.shape(), c),
            );
        }
        let spatial = self.len() / (b * c);
        let cg = c / groups; // channels per group
        let group_len = cg * spatial;

        let mut data = vec![T::zero(); self.len()];
        let mut means = vec![T::zero(); b * groups];
        let mut inv_stds = vec![T::zero(); b * groups];
        self.with_data(|x| {
            gamma.with_data(|gm| {
                beta.with_data(|bt| {
                    for bi in 0..b {
                        for gi in 0..groups {
                            let start = (bi * c + gi * cg) * spatial;
                            let xs = &x[start..start + group_len];
                            let mut mean = 0.0f64;
                            for &v in xs {
                                mean += v.as_f64();
                            }
                            mean /= group_len as f64;
                            let mut var = 0.0f64;
                            for &v in xs {
                                let d = v.as_f64() - mean;
                                var += d * d;
                            }
                            var /= group_len as f64;
                            let inv_std = T::from_f64(1.0 / (var + EPS).sqrt());
                            let mean = T::from_f64(mean);
                            means[bi * groups + gi] = mean;
                            inv_stds[bi * groups + gi] = inv_std;
                            for ci in 0..cg {
                                let ch = gi * cg + ci;
                                let row = start + ci * spatial;
                                for s in 0..spatial {
                                    let xhat = (x[row + s] - mean) * inv_std;
                                    data[row + s] = gm[ch] * xhat + bt[ch];
                                }
                            }
                        }
                    }
                })
            })
        });

        let x_rc = self.data_rc();
        let gamma_rc = gamma.data_rc();
        Ok(Tensor::from_op(
            shape,
            data,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g| {
                let x = x_rc.borrow();
                let gm = gamma_rc.borrow();
                let mut gx = vec![T::zero(); x.len()];
                let mut ggamma = vec![0.0f64; c];
                let mut gbeta = vec![0.0f64; c];
                let n = group_len as f64;
                for bi in 0..b {
                    for gi in 0..groups {
                        let start = (bi * c + gi * cg) * spatial;
                        let mean = means[bi * groups + gi];
                        let inv_std = inv_stds[bi * groups + gi];
                        // first pass: per-group sums of dxhat and dxhat*xhat
                        let mut sum_dxhat = 0.0f64;
                        let mut sum_dxhat_xhat = 0.0f64;
                        for ci in 0..cg {
                            let ch = gi * cg + ci;
                            let row = start + ci * spatial;
                            for s in 0..spatial {
                                let xhat = ((x[row + s] - mean) * inv_std).as_f64();
                                let gv = g[row + s].as_f64();
                                ggamma[ch] += gv * xhat;
                                gbeta[ch] += gv;
                                let dxhat = gv * gm[ch].as_f64();
                                sum_dxhat += dxhat;
                                sum_dxhat_xhat += dxhat * xhat;
                            }
                        }
                        let mean_dxhat = sum_dxhat / n;
                        let mean_dxhat_xhat = sum_dxhat_xhat / n;
                        for ci in 0..cg {
                            let ch = gi * cg + ci;
                            let row = start + ci * spatial;
                            for s in 0..spatial {
                                let xhat = ((x[row + s] - mean) * inv_std).as_f64();
                                let dxhat = g[row + s].as_f64() * gm[ch].as_f64();
                                gx[row + s] = T::from_f64(
                                    inv_std.as_f64() * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat),
                                );
                            }
                        }
                    }
                }
                let ggamma = ggamma.into_iter().map(T::from_f64).collect();
                let gbeta = gbeta.into_iter().map(T::from_f64).collect();
                vec![Some(gx), Some(ggamma), Some(gbeta)]
            }),
        ))
    }
}
