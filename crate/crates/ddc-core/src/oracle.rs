//! Reference implementations: direct convolution, window sums, and the
//! mean-times-sum recovery step.
//!
//! Everything here is written as plain nested loops over the layer
//! definition, independent of the bit-serial datapath, so the two routes to
//! an output tensor meet only at the final bit-exact comparison.

use ndarray::{Array1, Array2, Array3};

use crate::bank::{ActivationTensor, FilterBank, OutputTensor, PairMeans};
use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};

fn check_input(input: &ActivationTensor, spec: &LayerSpec) -> Result<()> {
    spec.validate()?;
    let got = input.dims();
    if got != (spec.c, spec.h, spec.w) {
        return Err(Error::DimensionMismatch {
            context: format!("input for layer {}", spec.id),
            expected: format!("({}, {}, {})", spec.c, spec.h, spec.w),
            got: format!("{got:?}"),
        });
    }
    Ok(())
}

fn check_bank(bank: &FilterBank<i8>, spec: &LayerSpec) -> Result<()> {
    let want = match spec.kind {
        LayerKind::Dw => (spec.n, 1, spec.k, spec.k),
        _ => (spec.n, spec.c, spec.k, spec.k),
    };
    if bank.dims() != want {
        return Err(Error::DimensionMismatch {
            context: format!("weights for layer {}", spec.id),
            expected: format!("{want:?}"),
            got: format!("{:?}", bank.dims()),
        });
    }
    Ok(())
}

/// Cross-correlation with zero padding, exact 32-bit accumulation.
///
/// Output channel `j` at position `(oh, ow)` sums
/// `input[c][oh*s - pad + kh][ow*s - pad + kw] * w[j][c][kh][kw]`;
/// depthwise layers restrict the sum to input channel `j`.
pub fn conv_direct(
    input: &ActivationTensor,
    bank: &FilterBank<i8>,
    spec: &LayerSpec,
) -> Result<OutputTensor> {
    check_input(input, spec)?;
    check_bank(bank, spec)?;
    let (oh_n, ow_n) = (spec.out_h(), spec.out_w());
    let mut out = Array3::<i32>::zeros((spec.n, oh_n, ow_n));
    for j in 0..spec.n {
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                let y0 = (oh * spec.stride) as isize - spec.pad as isize;
                let x0 = (ow * spec.stride) as isize - spec.pad as isize;
                let mut acc = 0i32;
                match spec.kind {
                    LayerKind::Dw => {
                        for kh in 0..spec.k {
                            for kw in 0..spec.k {
                                let v = input.padded(j, y0 + kh as isize, x0 + kw as isize);
                                acc += i32::from(v) * i32::from(bank.weights()[[j, 0, kh, kw]]);
                            }
                        }
                    }
                    _ => {
                        for c in 0..spec.c {
                            for kh in 0..spec.k {
                                for kw in 0..spec.k {
                                    let v = input.padded(c, y0 + kh as isize, x0 + kw as isize);
                                    acc += i32::from(v) * i32::from(bank.weights()[[j, c, kh, kw]]);
                                }
                            }
                        }
                    }
                }
                out[[j, oh, ow]] = acc;
            }
        }
    }
    Ok(OutputTensor::new(out))
}

/// Window sums for the recovery step.
///
/// Shared layers (std/pw/fc) use one sum per output position over the whole
/// `C x K x K` window; depthwise layers need one sum per (channel, position)
/// because every output channel reads a different input channel.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowSums {
    /// `[positions]`, position index `oh * W' + ow`.
    Shared(Array1<i32>),
    /// `[C][positions]`.
    PerChannel(Array2<i32>),
}

impl WindowSums {
    /// Sum feeding output channel `j` at flattened position `p`.
    pub fn for_channel(&self, j: usize, p: usize) -> i32 {
        match self {
            WindowSums::Shared(s) => s[p],
            WindowSums::PerChannel(s) => s[[j, p]],
        }
    }
}

pub fn window_sum(input: &ActivationTensor, spec: &LayerSpec) -> Result<WindowSums> {
    check_input(input, spec)?;
    let (oh_n, ow_n) = (spec.out_h(), spec.out_w());
    let positions = oh_n * ow_n;
    let sum_window = |c: usize, oh: usize, ow: usize| -> i32 {
        let y0 = (oh * spec.stride) as isize - spec.pad as isize;
        let x0 = (ow * spec.stride) as isize - spec.pad as isize;
        let mut acc = 0i32;
        for kh in 0..spec.k {
            for kw in 0..spec.k {
                acc += i32::from(input.padded(c, y0 + kh as isize, x0 + kw as isize));
            }
        }
        acc
    };
    match spec.kind {
        LayerKind::Dw => {
            let mut sums = Array2::<i32>::zeros((spec.c, positions));
            for c in 0..spec.c {
                for oh in 0..oh_n {
                    for ow in 0..ow_n {
                        sums[[c, oh * ow_n + ow]] = sum_window(c, oh, ow);
                    }
                }
            }
            Ok(WindowSums::PerChannel(sums))
        }
        _ => {
            let mut sums = Array1::<i32>::zeros(positions);
            for oh in 0..oh_n {
                for ow in 0..ow_n {
                    let mut acc = 0i32;
                    for c in 0..spec.c {
                        acc += sum_window(c, oh, ow);
                    }
                    sums[oh * ow_n + ow] = acc;
                }
            }
            Ok(WindowSums::Shared(sums))
        }
    }
}

/// Undo the mean bias: `out[j] = comp_out[j] + window_sum * M_{j/2}`.
///
/// This is the identity that makes complementary storage lossless:
/// convolving with the bias-stripped comp filters and adding the window sum
/// times the pair mean reproduces the biased-comp convolution exactly.
pub fn recover(
    comp_out: &OutputTensor,
    sums: &WindowSums,
    means: &PairMeans<i16>,
) -> Result<OutputTensor> {
    let (n, oh_n, ow_n) = comp_out.dims();
    if means.len() * 2 != n {
        return Err(Error::DimensionMismatch {
            context: format!("recover for layer {}", means.layer_id()),
            expected: format!("{} channels", means.len() * 2),
            got: format!("{n}"),
        });
    }
    let mut out = comp_out.data().clone();
    for j in 0..n {
        let m = i32::from(means.for_channel(j));
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                out[[j, oh, ow]] += sums.for_channel(j, oh * ow_n + ow) * m;
            }
        }
    }
    Ok(OutputTensor::new(out))
}

/// Materialize the comp-filter bank (stored bytes for even channels,
/// bitwise complements for odd) as an ordinary int8 bank for reference use.
pub fn comp_bank(store: &crate::bank::CompFilterStore) -> FilterBank<i8> {
    let d = store.stored().dim();
    let mut w = ndarray::Array4::<i8>::zeros((2 * d.0, d.1, d.2, d.3));
    for j in 0..2 * d.0 {
        for c in 0..d.1 {
            for kh in 0..d.2 {
                for kw in 0..d.3 {
                    w[[j, c, kh, kw]] = store.comp_weight(j, c, kh, kw);
                }
            }
        }
    }
    FilterBank::new(w, store.layer_id(), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::layer::{LayerKind, LayerSpec};
    use ndarray::{array, Array4};

    fn spec(
        kind: LayerKind,
        h: usize,
        c: usize,
        n: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> LayerSpec {
        LayerSpec {
            id: "t".into(),
            kind,
            h,
            w: h,
            c,
            n,
            k,
            stride,
            pad,
            fcc_enabled: false,
        }
    }

    /// Independent check: scatter each input element into every output it
    /// contributes to, the transpose of the gather in `conv_direct`.
    fn conv_scatter(
        input: &ActivationTensor,
        bank: &FilterBank<i8>,
        spec: &LayerSpec,
    ) -> Array3<i32> {
        let (oh_n, ow_n) = (spec.out_h(), spec.out_w());
        let mut out = Array3::<i32>::zeros((spec.n, oh_n, ow_n));
        for c in 0..spec.c {
            for y in 0..spec.h {
                for x in 0..spec.w {
                    let v = i32::from(input.data()[[c, y, x]]);
                    for kh in 0..spec.k {
                        for kw in 0..spec.k {
                            let oy = y as isize + spec.pad as isize - kh as isize;
                            let ox = x as isize + spec.pad as isize - kw as isize;
                            if oy < 0 || ox < 0 {
                                continue;
                            }
                            let (oy, ox) = (oy as usize, ox as usize);
                            if oy % spec.stride != 0 || ox % spec.stride != 0 {
                                continue;
                            }
                            let (oy, ox) = (oy / spec.stride, ox / spec.stride);
                            if oy >= oh_n || ox >= ow_n {
                                continue;
                            }
                            for j in 0..spec.n {
                                let (wc, wj) = match spec.kind {
                                    LayerKind::Dw => (0, j),
                                    _ => (c, j),
                                };
                                if spec.kind == LayerKind::Dw && j != c {
                                    continue;
                                }
                                out[[wj, oy, ox]] += v * i32::from(bank.weights()[[j, wc, kh, kw]]);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_independent_scatter_sum() {
        let spec = spec(LayerKind::Std, 8, 4, 6, 3, 1, 1);
        let input = fixtures::random_activation(4, 8, 8, 11);
        let bank = fixtures::random_int_bank(6, 4, 3, 3, 12);
        let direct = conv_direct(&input, &bank, &spec).unwrap();
        assert_eq!(direct.data(), &conv_scatter(&input, &bank, &spec));
    }

    #[test]
    fn conv_matches_scatter_with_stride_two() {
        let spec = spec(LayerKind::Std, 9, 3, 4, 3, 2, 1);
        let input = fixtures::random_activation(3, 9, 9, 21);
        let bank = fixtures::random_int_bank(4, 3, 3, 3, 22);
        let direct = conv_direct(&input, &bank, &spec).unwrap();
        assert_eq!(direct.data(), &conv_scatter(&input, &bank, &spec));
    }

    #[test]
    fn depthwise_uses_one_input_channel_per_filter() {
        let spec = spec(LayerKind::Dw, 6, 3, 3, 3, 1, 1);
        let input = fixtures::random_activation(3, 6, 6, 31);
        let bank = fixtures::random_int_bank(3, 1, 3, 3, 32);
        let direct = conv_direct(&input, &bank, &spec).unwrap();
        assert_eq!(direct.data(), &conv_scatter(&input, &bank, &spec));
    }

    #[test]
    fn fc_is_a_matvec() {
        let spec = spec(LayerKind::Fc, 1, 5, 3, 1, 1, 0);
        let input = ActivationTensor::new(array![[[1i8]], [[-2]], [[3]], [[-4]], [[5]]]);
        let w = Array4::from_shape_vec((3, 5, 1, 1), (1i8..=15).collect()).unwrap();
        let out = conv_direct(&input, &FilterBank::new(w, "t", false), &spec).unwrap();
        // Rows dot [1,-2,3,-4,5]: [1..5] -> 15-2*2-4*4+... computed directly.
        assert_eq!(out.data()[[0, 0, 0]], 1 - 4 + 9 - 16 + 25);
        assert_eq!(out.data()[[1, 0, 0]], 6 - 14 + 24 - 36 + 50);
        assert_eq!(out.data()[[2, 0, 0]], 11 - 24 + 39 - 56 + 75);
    }

    #[test]
    fn window_sum_equals_all_ones_convolution() {
        let spec = spec(LayerKind::Std, 7, 3, 2, 3, 2, 1);
        let input = fixtures::random_activation(3, 7, 7, 41);
        let ones = FilterBank::new(Array4::<i8>::ones((2, 3, 3, 3)), "t", false);
        let conv = conv_direct(&input, &ones, &spec).unwrap();
        match window_sum(&input, &spec).unwrap() {
            WindowSums::Shared(sums) => {
                let ow_n = spec.out_w();
                for oh in 0..spec.out_h() {
                    for ow in 0..ow_n {
                        assert_eq!(sums[oh * ow_n + ow], conv.data()[[0, oh, ow]]);
                    }
                }
            }
            _ => panic!("std layer must produce shared sums"),
        }
    }

    #[test]
    fn depthwise_window_sums_are_per_channel() {
        let spec = spec(LayerKind::Dw, 5, 4, 4, 3, 1, 1);
        let input = fixtures::random_activation(4, 5, 5, 51);
        let ones = FilterBank::new(Array4::<i8>::ones((4, 1, 3, 3)), "t", false);
        let conv = conv_direct(&input, &ones, &spec).unwrap();
        match window_sum(&input, &spec).unwrap() {
            WindowSums::PerChannel(sums) => {
                let ow_n = spec.out_w();
                for c in 0..4 {
                    for oh in 0..spec.out_h() {
                        for ow in 0..ow_n {
                            assert_eq!(sums[[c, oh * ow_n + ow]], conv.data()[[c, oh, ow]]);
                        }
                    }
                }
            }
            _ => panic!("dw layer must produce per-channel sums"),
        }
    }

    /// The recovery identity: conv with comp filters plus window-sum times
    /// mean equals conv with the biased-comp bank, for any store contents.
    #[test]
    fn recovery_identity_over_random_stores() {
        for seed in 0..10 {
            let spec = spec(LayerKind::Std, 6, 3, 8, 3, 1, 1);
            let store = fixtures::random_store(4, 3, 3, 3, seed);
            let input = fixtures::random_activation(3, 6, 6, 100 + seed);
            let comp_out = conv_direct(&input, &comp_bank(&store), &spec).unwrap();
            let sums = window_sum(&input, &spec).unwrap();
            let recovered = recover(&comp_out, &sums, store.means()).unwrap();
            let biased = store.reconstruct_biased().unwrap();
            let direct = conv_direct(&input, &biased, &spec).unwrap();
            assert_eq!(recovered, direct);
        }
    }

    #[test]
    fn recovery_identity_depthwise() {
        for seed in 0..10 {
            let spec = spec(LayerKind::Dw, 6, 8, 8, 3, 1, 1);
            let store = fixtures::random_store(4, 1, 3, 3, 200 + seed);
            let input = fixtures::random_activation(8, 6, 6, 300 + seed);
            let comp_out = conv_direct(&input, &comp_bank(&store), &spec).unwrap();
            let sums = window_sum(&input, &spec).unwrap();
            let recovered = recover(&comp_out, &sums, store.means()).unwrap();
            let direct = conv_direct(&input, &store.reconstruct_biased().unwrap(), &spec).unwrap();
            assert_eq!(recovered, direct);
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let spec = spec(LayerKind::Std, 8, 4, 6, 3, 1, 1);
        let input = fixtures::random_activation(3, 8, 8, 61);
        let bank = fixtures::random_int_bank(6, 4, 3, 3, 62);
        assert!(conv_direct(&input, &bank, &spec).is_err());
        let input = fixtures::random_activation(4, 8, 8, 63);
        let bank = fixtures::random_int_bank(6, 3, 3, 3, 64);
        assert!(conv_direct(&input, &bank, &spec).is_err());
    }
}
