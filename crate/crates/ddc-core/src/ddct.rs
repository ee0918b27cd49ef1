//! DDCT tensor container: the on-disk format the tools exchange.
//!
//! Layout, all little-endian:
//! magic `DDCT` (4 bytes), version `u8` = 1, dtype `u8` (0 = f32, 1 = i8,
//! 2 = i32, 3 = i16), ndims `u8`, then `ndims` dimension sizes as `u32`,
//! then the row-major payload.

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"DDCT";
pub const VERSION: u8 = 1;
const MAX_NDIMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    I8 = 1,
    I32 = 2,
    I16 = 3,
}

impl Dtype {
    fn from_code(code: u8) -> Option<Dtype> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::I8),
            2 => Some(Dtype::I32),
            3 => Some(Dtype::I16),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 | Dtype::I32 => 4,
            Dtype::I8 => 1,
            Dtype::I16 => 2,
        }
    }
}

/// A tensor of any of the supported element types.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    F32(ArrayD<f32>),
    I8(ArrayD<i8>),
    I32(ArrayD<i32>),
    I16(ArrayD<i16>),
}

impl Tensor {
    pub fn dtype(&self) -> Dtype {
        match self {
            Tensor::F32(_) => Dtype::F32,
            Tensor::I8(_) => Dtype::I8,
            Tensor::I32(_) => Dtype::I32,
            Tensor::I16(_) => Dtype::I16,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::F32(a) => a.shape(),
            Tensor::I8(a) => a.shape(),
            Tensor::I32(a) => a.shape(),
            Tensor::I16(a) => a.shape(),
        }
    }
}

fn format_err(origin: &str, reason: impl Into<String>) -> Error {
    Error::DdctFormat {
        path: origin.to_string(),
        reason: reason.into(),
    }
}

pub fn to_bytes(tensor: &Tensor) -> Vec<u8> {
    let shape = tensor.shape();
    let mut out = Vec::with_capacity(7 + 4 * shape.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(tensor.dtype() as u8);
    out.push(shape.len() as u8);
    for d in shape {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    match tensor {
        Tensor::F32(a) => {
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Tensor::I8(a) => {
            for v in a.iter() {
                out.push(*v as u8);
            }
        }
        Tensor::I32(a) => {
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Tensor::I16(a) => {
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Tensor> {
    if bytes.len() < 7 {
        return Err(format_err(origin, "shorter than the fixed header"));
    }
    if bytes[0..4] != MAGIC {
        return Err(format_err(origin, "bad magic, not a DDCT file"));
    }
    if bytes[4] != VERSION {
        return Err(format_err(
            origin,
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let dtype = Dtype::from_code(bytes[5])
        .ok_or_else(|| format_err(origin, format!("unknown dtype code {}", bytes[5])))?;
    let ndims = bytes[6] as usize;
    if ndims == 0 || ndims > MAX_NDIMS {
        return Err(format_err(origin, format!("ndims {ndims} out of range")));
    }
    let header = 7 + 4 * ndims;
    if bytes.len() < header {
        return Err(format_err(origin, "truncated dimension list"));
    }
    let mut dims = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let off = 7 + 4 * i;
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        dims.push(d as usize);
    }
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != count * dtype.size() {
        return Err(format_err(
            origin,
            format!(
                "payload is {} bytes but {:?} {:?} needs {}",
                payload.len(),
                dims,
                dtype,
                count * dtype.size()
            ),
        ));
    }
    let shape = IxDyn(&dims);
    let tensor = match dtype {
        Dtype::F32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::F32(ArrayD::from_shape_vec(shape, data).unwrap())
        }
        Dtype::I8 => {
            let data = payload.iter().map(|b| *b as i8).collect();
            Tensor::I8(ArrayD::from_shape_vec(shape, data).unwrap())
        }
        Dtype::I32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::I32(ArrayD::from_shape_vec(shape, data).unwrap())
        }
        Dtype::I16 => {
            let data = payload
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::I16(ArrayD::from_shape_vec(shape, data).unwrap())
        }
    };
    Ok(tensor)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    fs::write(path, to_bytes(tensor))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    from_bytes(&bytes, &path.display().to_string())
}
