//! Dense tensor arithmetic with reverse-mode automatic differentiation.
//!
//! The scope is deliberately narrow: exactly the operations a small
//! spatio-temporal diffusion UNet needs on CPU, with deterministic,
//! fixed-order accumulation so that bit-exact invariance tests are possible.
//!
//! Design notes:
//! - A [`Tensor`] is an immutable node in an acyclic compute graph. Leaves
//!   created with `requires_grad` collect gradients when [`Tensor::backward`]
//!   runs on a scalar loss. Optimizers mutate leaf storage in place between
//!   steps; everything else is write-once.
//! - Graphs are confined to one thread (`Rc` handles, deliberately `!Send`).
//!   Parallel evaluation happens across independent graphs.
//! - Matrix products go through a single GEMM entry point whose accumulation
//!   order over the reduction axis is the same for every output element.
//!   Everything else accumulates in row-major order.

mod gemm;
mod grad_check;
mod l4dt;
mod ops_basic;
mod ops_conv;
mod ops_linalg;
mod ops_norm;
mod optim;
mod tensor;

pub use grad_check::grad_check;
pub use l4dt::{load, load_any, save, AnyTensor};
pub use ops_linalg::attention;
pub use optim::{Adam, AdamState, Ema};
pub use tensor::{Tensor, TensorError};

use std::fmt;

pub type Result<T> = std::result::Result<T, TensorError>;

/// Element dtype tag, as stored in the L4DT container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dtype::F32 => write!(f, "float32"),
            Dtype::F64 => write!(f, "float64"),
        }
    }
}

/// Scalar element type. Implemented for `f32` (training) and `f64`
/// (gradient checking and schedule math).
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    const DTYPE: Dtype;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// C += A * B over the given dimensions, row-major, fixed reduction order.
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn to_le_bytes(self, out: &mut Vec<u8>);
    fn from_le_bytes(bytes: &[u8]) -> Self;
    fn byte_width() -> usize;
}

impl Scalar for f32 {
    const DTYPE: Dtype = Dtype::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    ) {
        gemm::sgemm_checked(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn to_le_bytes(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le_bytes(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("f32 needs 4 bytes"))
    }

    fn byte_width() -> usize {
        4
    }
}

impl Scalar for f64 {
    const DTYPE: Dtype = Dtype::F64;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    ) {
        gemm::dgemm_checked(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn to_le_bytes(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le_bytes(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("f64 needs 8 bytes"))
    }

    fn byte_width() -> usize {
        8
    }
}
