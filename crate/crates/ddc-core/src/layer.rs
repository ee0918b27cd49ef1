//! Layer geometry descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four layer classes the datapath distinguishes.
///
/// Standard and pointwise convolutions share one input window across all
/// output channels; depthwise convolutions pair each output channel with a
/// single input channel; fully connected layers are the `H = W = K = 1`
/// special case and never carry complementary weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Std,
    Pw,
    Dw,
    Fc,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Std => "std",
            LayerKind::Pw => "pw",
            LayerKind::Dw => "dw",
            LayerKind::Fc => "fc",
        }
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Geometry of one layer: input `C x H x W`, `N` filters of size `K x K x C`
/// (depthwise: `K x K x 1` with `N == C`), plus stride and zero padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub n: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    /// Whether this layer's weights are stored in complementary form when
    /// the machine configuration supports it.
    pub fcc_enabled: bool,
}

/// Dot products longer than this overflow the 32-bit accumulator bound.
pub const VECTOR_LEN_GUARD: usize = 1 << 16;

impl LayerSpec {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }

    /// Number of output positions `H' * W'`.
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Flattened length of one filter as the datapath streams it:
    /// `K*K*C` for std, `C` for pw and fc, `K*K` for dw.
    pub fn vec_len(&self) -> usize {
        match self.kind {
            LayerKind::Std => self.k * self.k * self.c,
            LayerKind::Pw | LayerKind::Fc => self.c,
            LayerKind::Dw => self.k * self.k,
        }
    }

    /// Number of filters in the bank (dw: one per channel).
    pub fn filters(&self) -> usize {
        self.n
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidGeometry {
                layer: self.id.clone(),
                reason,
            })
        };
        if self.h == 0 || self.w == 0 || self.c == 0 || self.n == 0 || self.k == 0 {
            return fail("all dimensions must be positive".into());
        }
        if self.stride == 0 {
            return fail("stride must be positive".into());
        }
        if self.h + 2 * self.pad < self.k || self.w + 2 * self.pad < self.k {
            return fail(format!(
                "kernel {k} exceeds padded input {h}x{w}",
                k = self.k,
                h = self.h + 2 * self.pad,
                w = self.w + 2 * self.pad
            ));
        }
        match self.kind {
            LayerKind::Pw => {
                if self.k != 1 {
                    return fail(format!("pointwise layers require K = 1, got {}", self.k));
                }
            }
            LayerKind::Dw => {
                if self.n != self.c {
                    return fail(format!(
                        "depthwise layers require N == C, got N = {}, C = {}",
                        self.n, self.c
                    ));
                }
            }
            LayerKind::Fc => {
                if self.k != 1 || self.h != 1 || self.w != 1 {
                    return fail("fully connected layers require H = W = K = 1".into());
                }
                if self.fcc_enabled {
                    return fail("fully connected layers never use complementary storage".into());
                }
            }
            LayerKind::Std => {}
        }
        if self.fcc_enabled && !self.n.is_multiple_of(2) {
            return Err(Error::OddFilterCount {
                layer: self.id.clone(),
                n: self.n,
            });
        }
        let guard_len = match self.kind {
            LayerKind::Dw => self.k * self.k,
            _ => self.k * self.k * self.c,
        };
        if guard_len > VECTOR_LEN_GUARD {
            return Err(Error::AccumulatorGuard {
                layer: self.id.clone(),
                len: guard_len,
            });
        }
        Ok(())
    }
}
