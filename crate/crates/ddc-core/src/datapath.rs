//! Bit-serial datapath around the macros: input bit-plane streaming, im2col
//! window extraction, and the shift-add that folds raw AND popcounts back
//! into signed partial sums.
//!
//! Both activations and weights are 8-bit two's complement, so bit 7 of
//! either operand carries weight -128 while bits 0-6 are positive. A
//! multiply-accumulate over a window therefore splits into 64 plane pairs:
//! `sum_l w_l*x_l = sum_{k,b} s(k)s(b) 2^(k+b) * count(k,b)` with
//! `count(k,b)` the number of lanes where input bit `k` and weight bit `b`
//! are both set - exactly what the column adder trees deliver.

use ndarray::{Array2, Array3};

use crate::bank::ActivationTensor;
use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};

/// Sign of bit position `j` in two's complement: -1 for the top bit.
fn sign(j: usize) -> i64 {
    if j == 7 {
        -1
    } else {
        1
    }
}

/// Bit-plane masks for up to 32 lanes starting at `lane0`: bit `lane0 + i`
/// of `planes[k]` is bit `k` of `values[i]`.
pub fn bit_planes_at(values: &[i8], lane0: usize) -> Result<[u32; 8]> {
    if lane0 + values.len() > 32 {
        return Err(Error::IndexOutOfRange {
            what: "bit-plane lane",
            got: lane0 + values.len(),
            limit: 32,
        });
    }
    let mut planes = [0u32; 8];
    for (i, v) in values.iter().enumerate() {
        let byte = *v as u8;
        for (k, plane) in planes.iter_mut().enumerate() {
            if (byte >> k) & 1 == 1 {
                *plane |= 1 << (lane0 + i);
            }
        }
    }
    Ok(planes)
}

pub fn bit_planes(values: &[i8]) -> Result<[u32; 8]> {
    bit_planes_at(values, 0)
}

/// Serial presentation of a value vector: plane `k` of chunk `t` is the
/// 32-lane mask for elements `32t..32t+32`. One chunk plane is what a macro
/// consumes per cycle.
#[derive(Clone, Debug)]
pub struct BitSerialStream {
    planes: Vec<[u32; 8]>,
    len: usize,
}

impl BitSerialStream {
    pub fn from_values(values: &[i8]) -> Self {
        let planes = values
            .chunks(32)
            .map(|c| bit_planes(c).expect("chunk fits 32 lanes"))
            .collect();
        BitSerialStream {
            planes,
            len: values.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn chunks(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, chunk: usize, k: usize) -> u32 {
        self.planes[chunk][k]
    }
}

/// Raw popcounts per (input plane, weight bit) for one accumulator.
pub type CountGrid = [[u32; 8]; 8];

/// Fold a count grid into the signed partial sum it encodes.
pub fn shift_add(grid: &CountGrid) -> i32 {
    let mut acc = 0i64;
    for (k, row) in grid.iter().enumerate() {
        for (b, count) in row.iter().enumerate() {
            acc += sign(k) * sign(b) * (i64::from(*count) << (k + b));
        }
    }
    i32::try_from(acc).expect("window length guard keeps partial sums in i32")
}

/// Plane popcount accumulator for window sums: feeding the live-lane
/// popcount of every input plane reconstructs `sum_l x_l`.
#[derive(Clone, Copy, Debug, Default)]
pub struct WsumAccum {
    counts: [u32; 8],
}

impl WsumAccum {
    pub fn add_plane(&mut self, k: usize, count: u32) {
        self.counts[k] += count;
    }

    pub fn value(&self) -> i32 {
        let mut acc = 0i64;
        for (k, count) in self.counts.iter().enumerate() {
            acc += sign(k) * (i64::from(*count) << k);
        }
        i32::try_from(acc).expect("window length guard keeps window sums in i32")
    }
}

/// Recovery step as the accumulate unit performs it after the last plane.
pub fn aru_recover(psum: i32, wsum: i32, mean: i16) -> i32 {
    psum + wsum * i32::from(mean)
}

/// Window matrix `[positions][vec_len]` for shared-filter layers. Element
/// order inside a row is channel-major then kernel-row-major, matching the
/// flattened filter layout: `i = c*K*K + kh*K + kw`.
pub fn im2col(input: &ActivationTensor, spec: &LayerSpec) -> Result<Array2<i8>> {
    spec.validate()?;
    if spec.kind == LayerKind::Dw {
        return Err(Error::ModeViolation {
            operation: "im2col".into(),
            required: "std/pw/fc layer".into(),
            actual: "dw".into(),
        });
    }
    let got = input.dims();
    if got != (spec.c, spec.h, spec.w) {
        return Err(Error::DimensionMismatch {
            context: format!("im2col input for layer {}", spec.id),
            expected: format!("({}, {}, {})", spec.c, spec.h, spec.w),
            got: format!("{got:?}"),
        });
    }
    let (oh_n, ow_n) = (spec.out_h(), spec.out_w());
    let mut cols = Array2::<i8>::zeros((oh_n * ow_n, spec.vec_len()));
    for oh in 0..oh_n {
        for ow in 0..ow_n {
            let y0 = (oh * spec.stride) as isize - spec.pad as isize;
            let x0 = (ow * spec.stride) as isize - spec.pad as isize;
            let p = oh * ow_n + ow;
            let mut i = 0;
            for c in 0..spec.c {
                for kh in 0..spec.k {
                    for kw in 0..spec.k {
                        cols[[p, i]] = input.padded(c, y0 + kh as isize, x0 + kw as isize);
                        i += 1;
                    }
                }
            }
        }
    }
    Ok(cols)
}

/// Per-channel window matrix `[C][positions][K*K]` for depthwise layers.
pub fn im2col_dw(input: &ActivationTensor, spec: &LayerSpec) -> Result<Array3<i8>> {
    spec.validate()?;
    if spec.kind != LayerKind::Dw {
        return Err(Error::ModeViolation {
            operation: "im2col_dw".into(),
            required: "dw layer".into(),
            actual: spec.kind.to_string(),
        });
    }
    let got = input.dims();
    if got != (spec.c, spec.h, spec.w) {
        return Err(Error::DimensionMismatch {
            context: format!("im2col input for layer {}", spec.id),
            expected: format!("({}, {}, {})", spec.c, spec.h, spec.w),
            got: format!("{got:?}"),
        });
    }
    let (oh_n, ow_n) = (spec.out_h(), spec.out_w());
    let mut cols = Array3::<i8>::zeros((spec.c, oh_n * ow_n, spec.k * spec.k));
    for c in 0..spec.c {
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                let y0 = (oh * spec.stride) as isize - spec.pad as isize;
                let x0 = (ow * spec.stride) as isize - spec.pad as isize;
                let p = oh * ow_n + ow;
                for kh in 0..spec.k {
                    for kw in 0..spec.k {
                        cols[[c, p, kh * spec.k + kw]] =
                            input.padded(c, y0 + kh as isize, x0 + kw as isize);
                    }
                }
            }
        }
    }
    Ok(cols)
}
