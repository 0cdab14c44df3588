//! The L4DT tensor container.
//!
//! Layout: magic `L4DT` (0x4C 0x34 0x44 0x54), version byte 0x01, dtype byte
//! (0 = float32, 1 = float64), ndim byte, `ndim` little-endian u64 extents,
//! then row-major little-endian scalar data. Bit-exact by construction.

use crate::{Dtype, Result, Scalar, Tensor, TensorError};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"L4DT";
const VERSION: u8 = 0x01;

/// A loaded tensor of either supported dtype.
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, tensor: &Tensor<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION, T::DTYPE.code()])?;
    let shape = tensor.shape();
    if shape.len() > u8::MAX as usize {
        return Err(TensorError::Format(format!("{} dims exceed the format limit", shape.len())));
    }
    w.write_all(&[shape.len() as u8])?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(tensor.len() * T::byte_width());
    tensor.with_data(|data| {
        for &v in data {
            v.to_le_bytes(&mut buf);
        }
    });
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<(u8, Vec<usize>)> {
    let mut head = [0u8; 7];
    r.read_exact(&mut head)?;
    if head[..4] != MAGIC {
        return Err(TensorError::Format("bad magic bytes".into()));
    }
    if head[4] != VERSION {
        return Err(TensorError::Format(format!("unsupported version {}", head[4])));
    }
    let dtype = head[5];
    let ndim = head[6] as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        shape.push(u64::from_le_bytes(b) as usize);
    }
    Ok((dtype, shape))
}

fn read_data<T: Scalar>(r: &mut impl Read, shape: Vec<usize>) -> Result<Tensor<T>> {
    let n: usize = shape.iter().product();
    let width = T::byte_width();
    let mut bytes = vec![0u8; n * width];
    r.read_exact(&mut bytes)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(TensorError::Format("trailing bytes after tensor data".into()));
    }
    let data = bytes.chunks_exact(width).map(T::from_le_bytes).collect();
    Tensor::from_vec(&shape, data)
}

/// Load a tensor whose dtype must match `T`.
pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let (dtype, shape) = read_header(&mut r)?;
    if dtype != T::DTYPE.code() {
        return Err(TensorError::Format(format!(
            "{}: dtype code {} does not match requested {}",
            path.display(),
            dtype,
            T::DTYPE
        )));
    }
    read_data(&mut r, shape)
}

/// Load a tensor of whichever dtype the file declares.
pub fn load_any(path: impl AsRef<Path>) -> Result<AnyTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let (dtype, shape) = read_header(&mut r)?;
    match dtype {
        x if x == Dtype::F32.code() => Ok(AnyTensor::F32(read_data(&mut r, shape)?)),
        x if x == Dtype::F64.code() => Ok(AnyTensor::F64(read_data(&mut r, shape)?)),
        other => Err(TensorError::Format(format!("unknown dtype code {}", other))),
    }
}
