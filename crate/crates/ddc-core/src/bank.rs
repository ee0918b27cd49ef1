//! Tensor containers: filter banks, pair means, activations, outputs, and
//! the complementary filter store.
//!
//! Filter banks are `[N][C][Kh][Kw]` arrays. Flattened filter order is
//! channel-major then row-major; the same ordering is used by the im2col
//! lowering and by the row packing in the mapper, which is what makes the
//! bit-level pipeline line up with the reference convolution.

use ndarray::{Array3, Array4, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::scalar::BankScalar;

/// A bank of `N` filters with `C` input channels and `K x K` taps.
///
/// The element type distinguishes pipeline stages: `f32`/`f64` before
/// quantization, `i8` after.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank<T> {
    weights: Array4<T>,
    layer_id: String,
    fcc_enabled: bool,
}

impl<T> FilterBank<T> {
    pub fn new(weights: Array4<T>, layer_id: impl Into<String>, fcc_enabled: bool) -> Self {
        FilterBank {
            weights,
            layer_id: layer_id.into(),
            fcc_enabled,
        }
    }

    pub fn weights(&self) -> &Array4<T> {
        &self.weights
    }

    pub fn into_weights(self) -> Array4<T> {
        self.weights
    }

    pub fn layer_id(&self) -> &str {
        &self.layer_id
    }

    pub fn fcc_enabled(&self) -> bool {
        self.fcc_enabled
    }

    /// `(N, C, Kh, Kw)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let d = self.weights.dim();
        (d.0, d.1, d.2, d.3)
    }

    pub fn filter_count(&self) -> usize {
        self.weights.dim().0
    }

    /// Elements per filter, `C * K * K`.
    pub fn filter_len(&self) -> usize {
        let (_, c, kh, kw) = self.dims();
        c * kh * kw
    }

    /// One filter as a `[C][Kh][Kw]` view.
    pub fn filter(&self, n: usize) -> ArrayView3<'_, T> {
        self.weights.index_axis(Axis(0), n)
    }

    /// Number of twin pairs; errors when the bank cannot be paired.
    pub fn pair_count(&self) -> Result<usize> {
        let n = self.filter_count();
        if !n.is_multiple_of(2) {
            return Err(Error::OddFilterCount {
                layer: self.layer_id.clone(),
                n,
            });
        }
        Ok(n / 2)
    }
}

impl<T: Copy> FilterBank<T> {
    /// Filter `n` flattened in channel-major, row-major order.
    pub fn flatten_filter(&self, n: usize) -> Vec<T> {
        self.filter(n).iter().copied().collect()
    }

    pub fn map<U, F: FnMut(T) -> U>(&self, f: F) -> FilterBank<U> {
        FilterBank {
            weights: self.weights.mapv(f),
            layer_id: self.layer_id.clone(),
            fcc_enabled: self.fcc_enabled,
        }
    }
}

/// One mean per twin pair, indexed by pair (logical channels `2p`, `2p+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeans<M> {
    values: Vec<M>,
    layer_id: String,
}

impl<M: Copy> PairMeans<M> {
    pub fn new(values: Vec<M>, layer_id: impl Into<String>) -> Self {
        PairMeans {
            values,
            layer_id: layer_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, pair: usize) -> M {
        self.values[pair]
    }

    /// Mean for logical output channel `j` (pair `j / 2`).
    pub fn for_channel(&self, j: usize) -> M {
        self.values[j / 2]
    }

    pub fn values(&self) -> &[M] {
        &self.values
    }

    pub fn layer_id(&self) -> &str {
        &self.layer_id
    }

    pub(crate) fn check_pairs<T: BankScalar>(&self, bank: &FilterBank<T>) -> Result<()> {
        let pairs = bank.pair_count()?;
        if pairs != self.values.len() {
            return Err(Error::DimensionMismatch {
                context: format!("pair means for layer {}", self.layer_id),
                expected: format!("{pairs} pairs"),
                got: format!("{} means", self.values.len()),
            });
        }
        Ok(())
    }
}

/// Input feature map, `[C][H][W]`, 8-bit activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    data: Array3<i8>,
}

impl ActivationTensor {
    pub fn new(data: Array3<i8>) -> Self {
        ActivationTensor { data }
    }

    pub fn data(&self) -> &Array3<i8> {
        &self.data
    }

    /// `(C, H, W)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    /// Value at `(c, y, x)` where `y`/`x` may point into the halo;
    /// out-of-bounds reads return the zero padding value.
    pub fn padded(&self, c: usize, y: isize, x: isize) -> i8 {
        let (_, h, w) = self.dims();
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0
        } else {
            self.data[[c, y as usize, x as usize]]
        }
    }
}

/// Accumulator-precision output feature map, `[N][H'][W']`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTensor {
    data: Array3<i32>,
}

impl OutputTensor {
    pub fn new(data: Array3<i32>) -> Self {
        OutputTensor { data }
    }

    pub fn data(&self) -> &Array3<i32> {
        &self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    /// Requantize to 8-bit activations by arithmetic right shift and clamp,
    /// for feeding the next layer.
    pub fn requantize(&self, shift: u32) -> ActivationTensor {
        ActivationTensor::new(
            self.data
                .mapv(|v| (v >> shift).clamp(i32::from(i8::MIN), i32::from(i8::MAX)) as i8),
        )
    }
}

/// The on-device form of a complementary bank: only even logical channels
/// are stored (bias removed); odd channels are materialized by bitwise
/// complement of the stored bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompFilterStore {
    stored: Array4<i8>,
    means: PairMeans<i16>,
    scale: f64,
    layer_id: String,
}

impl CompFilterStore {
    pub fn new(
        stored: Array4<i8>,
        means: PairMeans<i16>,
        scale: f64,
        layer_id: impl Into<String>,
    ) -> Result<Self> {
        let layer_id = layer_id.into();
        if stored.dim().0 != means.len() {
            return Err(Error::DimensionMismatch {
                context: format!("comp store for layer {layer_id}"),
                expected: format!("{} stored filters", means.len()),
                got: format!("{}", stored.dim().0),
            });
        }
        Ok(CompFilterStore {
            stored,
            means,
            scale,
            layer_id,
        })
    }

    /// `[N/2][C][Kh][Kw]` stored (even-channel) comp weights.
    pub fn stored(&self) -> &Array4<i8> {
        &self.stored
    }

    pub fn means(&self) -> &PairMeans<i16> {
        &self.means
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn layer_id(&self) -> &str {
        &self.layer_id
    }

    /// Total logical output channels, twice the stored count.
    pub fn logical_channels(&self) -> usize {
        2 * self.stored.dim().0
    }

    /// Comp weight of logical channel `j`: stored byte for even `j`,
    /// bitwise complement for odd `j`.
    pub fn comp_weight(&self, j: usize, c: usize, kh: usize, kw: usize) -> i8 {
        let v = self.stored[[j / 2, c, kh, kw]];
        if j.is_multiple_of(2) {
            v
        } else {
            !v
        }
    }

    /// Stored filter `p` flattened in channel-major, row-major order.
    pub fn flatten_stored(&self, p: usize) -> Vec<i8> {
        self.stored.index_axis(Axis(0), p).iter().copied().collect()
    }

    /// Rebuild the biased-comp bank: `w = comp + mean` for every logical
    /// channel. Errors if any reconstructed weight leaves the 8-bit range,
    /// which indicates a corrupt store.
    pub fn reconstruct_biased(&self) -> Result<FilterBank<i8>> {
        let (p, c, kh, kw) = {
            let d = self.stored.dim();
            (d.0, d.1, d.2, d.3)
        };
        let mut out = Array4::<i8>::zeros((2 * p, c, kh, kw));
        for pair in 0..p {
            let m = i32::from(self.means.get(pair));
            for ci in 0..c {
                for y in 0..kh {
                    for x in 0..kw {
                        for half in 0..2 {
                            let j = 2 * pair + half;
                            let comp = i32::from(self.comp_weight(j, ci, y, x));
                            let w = comp + m;
                            if w < i32::from(i8::MIN) || w > i32::from(i8::MAX) {
                                return Err(Error::ComplementIntegrity {
                                    layer: self.layer_id.clone(),
                                    pair,
                                    c: ci,
                                    kh: y,
                                    kw: x,
                                });
                            }
                            out[[j, ci, y, x]] = w as i8;
                        }
                    }
                }
            }
        }
        Ok(FilterBank::new(out, self.layer_id.clone(), true))
    }
}
