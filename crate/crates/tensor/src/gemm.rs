//! Thin safe wrappers around `matrixmultiply`.
//!
//! The microkernel iterates the reduction axis in the same blocked order for
//! every output element, so column-permuted inputs yield bit-identical
//! permuted outputs. That property is what the circular-shift equivariance
//! tests rely on.

fn check_bounds(
    m: usize,
    k: usize,
    n: usize,
    a_len: usize,
    rsa: isize,
    csa: isize,
    b_len: usize,
    rsb: isize,
    csb: isize,
    c_len: usize,
    rsc: isize,
    csc: isize,
) {
    let max_idx = |rows: usize, cols: usize, rs: isize, cs: isize| -> isize {
        let mut hi = 0isize;
        for (extent, stride) in [(rows, rs), (cols, cs)] {
            if extent == 0 {
                return -1;
            }
            hi += (extent as isize - 1) * stride;
        }
        hi
    };
    let a_hi = max_idx(m, k, rsa, csa);
    let b_hi = max_idx(k, n, rsb, csb);
    let c_hi = max_idx(m, n, rsc, csc);
    assert!(a_hi < a_len as isize, "gemm: A out of bounds");
    assert!(b_hi < b_len as isize, "gemm: B out of bounds");
    assert!(c_hi < c_len as isize, "gemm: C out of bounds");
}

#[allow(clippy::too_many_arguments)]
pub fn sgemm_checked(
    m: usize,
    k: usize,
    n: usize,
    alpha: f32,
    a: &[f32],
    rsa: isize,
    csa: isize,
    b: &[f32],
    rsb: isize,
    csb: isize,
    beta: f32,
    c: &mut [f32],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    check_bounds(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len(), rsc, csc);
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub fn dgemm_checked(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    check_bounds(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len(), rsc, csc);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        )
    }
}
