//! Filter-wise complementary transformation.
//!
//! The pipeline turns a real-valued filter bank into a form where only every
//! other filter is stored and the missing twin is recovered by bitwise
//! complement inside the memory array:
//!
//! 1. pair means - one mean per twin pair over both filters;
//! 2. symmetrize - replace the twin closer to the mean by the mirror image
//!    of the farther one, so `w_j + w_j1 == 2M` elementwise;
//! 3. quantize to int8, then recompute means and re-symmetrize in integer
//!    arithmetic (quantization rounding breaks exact symmetry);
//! 4. complementize - subtract 1 from the smaller twin of each element pair,
//!    so `w_j + w_j1 == 2M - 1`, i.e. `(w_j - M)` and `(w_j1 - M)` are exact
//!    bitwise complements in 8-bit two's complement;
//! 5. decompose - strip the mean bias and keep only even channels; odd
//!    channels become the bitwise NOT of the stored bytes.
//!
//! Integer symmetrization can push a mirror outside `[-127, 127]`; such
//! elements saturate and their pair is flagged. Flagged pairs flow through
//! the remaining stages mechanically but lose the complement guarantee, and
//! [`verify_complementarity`] reports them.

use ndarray::Array4;

use crate::bank::{CompFilterStore, FilterBank, PairMeans};
use crate::error::{Error, Result};
use crate::scalar::{BankScalar, Real, INT_WEIGHT_MAX, INT_WEIGHT_MIN};

/// Mean of each twin pair `(2p, 2p+1)` over all `2*C*K*K` weights.
pub fn compute_pair_means<T: BankScalar>(bank: &FilterBank<T>) -> Result<PairMeans<T::Mean>> {
    let pairs = bank.pair_count()?;
    let per_filter = bank.filter_len();
    let mut values = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let mut acc = T::Acc::default();
        for &v in bank.filter(2 * p).iter() {
            acc = T::acc_add(acc, v);
        }
        for &v in bank.filter(2 * p + 1).iter() {
            acc = T::acc_add(acc, v);
        }
        values.push(T::mean_from(acc, 2 * per_filter));
    }
    Ok(PairMeans::new(values, bank.layer_id()))
}

/// A pair whose symmetrization saturated at least one element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedPair {
    pub pair: usize,
    /// Number of saturated elements in the pair.
    pub saturated: usize,
    /// Coordinates `(c, kh, kw)` of the first saturated element.
    pub first: (usize, usize, usize),
}

/// Result of [`symmetrize`]: the mirrored bank plus saturation flags.
#[derive(Debug, Clone)]
pub struct Symmetrized<T> {
    pub bank: FilterBank<T>,
    pub flagged: Vec<FlaggedPair>,
}

impl<T> Symmetrized<T> {
    pub fn is_flagged(&self, pair: usize) -> bool {
        self.flagged.iter().any(|f| f.pair == pair)
    }
}

/// Make every element pair symmetric about its pair mean.
///
/// The twin farther from the mean survives; the nearer one is replaced by
/// `2M - w` of the survivor. Ties keep the even-channel twin. Integer
/// mirrors that leave `[-127, 127]` saturate and flag the pair.
pub fn symmetrize<T: BankScalar>(
    bank: &FilterBank<T>,
    means: &PairMeans<T::Mean>,
) -> Result<Symmetrized<T>> {
    means.check_pairs(bank)?;
    let (_, c, kh, kw) = bank.dims();
    let mut weights = bank.weights().clone();
    let mut flagged = Vec::new();
    for p in 0..means.len() {
        let m = means.get(p);
        let mut saturated = 0usize;
        let mut first = (0, 0, 0);
        for ci in 0..c {
            for y in 0..kh {
                for x in 0..kw {
                    let a = weights[[2 * p, ci, y, x]];
                    let b = weights[[2 * p + 1, ci, y, x]];
                    let (val, sat) = if T::dist(a, m) >= T::dist(b, m) {
                        let (mirror, sat) = T::mirror(a, m);
                        weights[[2 * p + 1, ci, y, x]] = mirror;
                        (mirror, sat)
                    } else {
                        let (mirror, sat) = T::mirror(b, m);
                        weights[[2 * p, ci, y, x]] = mirror;
                        (mirror, sat)
                    };
                    let _ = val;
                    if sat {
                        if saturated == 0 {
                            first = (ci, y, x);
                        }
                        saturated += 1;
                    }
                }
            }
        }
        if saturated > 0 {
            flagged.push(FlaggedPair {
                pair: p,
                saturated,
                first,
            });
        }
    }
    Ok(Symmetrized {
        bank: FilterBank::new(weights, bank.layer_id(), bank.fcc_enabled()),
        flagged,
    })
}

/// Per-tensor symmetric int8 quantization.
#[derive(Debug, Clone)]
pub struct Quantized<R> {
    pub bank: FilterBank<i8>,
    pub scale: R,
}

/// Quantize with `scale = max|w| / 127`, rounding half away from zero and
/// clamping to `[-127, 127]`. An all-zero bank quantizes with scale 1.
pub fn quantize<R: Real>(bank: &FilterBank<R>) -> Quantized<R> {
    let mut max_abs = R::zero();
    for &v in bank.weights().iter() {
        let a = v.abs();
        if a > max_abs {
            max_abs = a;
        }
    }
    let scale = if max_abs == R::zero() {
        R::one()
    } else {
        max_abs / R::from_i32(INT_WEIGHT_MAX).unwrap()
    };
    let ints = bank.map(|v| {
        let q = (v / scale).round().to_i32().unwrap_or(0);
        q.clamp(INT_WEIGHT_MIN, INT_WEIGHT_MAX) as i8
    });
    Quantized { bank: ints, scale }
}

/// Inverse of [`quantize`] up to rounding: `w = q * scale`.
pub fn dequantize<R: Real>(bank: &FilterBank<i8>, scale: R) -> FilterBank<R> {
    bank.map(|q| R::from_i32(i32::from(q)).unwrap() * scale)
}

/// Break the exact symmetry by one unit: subtract 1 from the smaller twin of
/// every element pair, making `(w_j - M)` and `(w_j1 - M)` bitwise
/// complements.
///
/// Preconditions: no weight is -128 (the quantizer reserves it), and every
/// unflagged pair is integer symmetric about its mean.
pub fn complementize(sym: &Symmetrized<i8>, means: &PairMeans<i16>) -> Result<FilterBank<i8>> {
    means.check_pairs(&sym.bank)?;
    let (_, c, kh, kw) = sym.bank.dims();
    let mut weights = sym.bank.weights().clone();
    for p in 0..means.len() {
        let m = means.get(p);
        let skip_symmetry_check = sym.is_flagged(p);
        for ci in 0..c {
            for y in 0..kh {
                for x in 0..kw {
                    let a = weights[[2 * p, ci, y, x]];
                    let b = weights[[2 * p + 1, ci, y, x]];
                    if a == i8::MIN || b == i8::MIN {
                        return Err(Error::WeightUnderflow {
                            layer: sym.bank.layer_id().to_string(),
                            pair: p,
                            c: ci,
                            kh: y,
                            kw: x,
                        });
                    }
                    if !skip_symmetry_check && !<i8 as BankScalar>::pair_sum_matches(a, b, m) {
                        return Err(Error::NotSymmetric {
                            layer: sym.bank.layer_id().to_string(),
                            pair: p,
                            c: ci,
                            kh: y,
                            kw: x,
                        });
                    }
                    if a >= b {
                        weights[[2 * p + 1, ci, y, x]] = b - 1;
                    } else {
                        weights[[2 * p, ci, y, x]] = a - 1;
                    }
                }
            }
        }
    }
    Ok(FilterBank::new(
        weights,
        sym.bank.layer_id(),
        sym.bank.fcc_enabled(),
    ))
}

/// A biased-comp bank: complementized weights together with the means and
/// quantization scale needed to interpret them.
#[derive(Debug, Clone)]
pub struct BiasedCompBank {
    pub bank: FilterBank<i8>,
    pub means: PairMeans<i16>,
    pub scale: f64,
}

/// Strip the mean bias and drop odd channels.
///
/// The stored byte for pair `p` is `w_2p - M_p` in 8-bit two's complement;
/// the integrity check confirms the odd channel equals its bitwise
/// complement. Pairs in `tolerate` (saturation-flagged upstream) skip the
/// check and are reported by [`verify_complementarity`] instead.
pub fn decompose(biased: &BiasedCompBank, tolerate: &[FlaggedPair]) -> Result<CompFilterStore> {
    let pairs = biased.means.len();
    biased.means.check_pairs(&biased.bank)?;
    let (_, c, kh, kw) = biased.bank.dims();
    let mut stored = Array4::<i8>::zeros((pairs, c, kh, kw));
    for p in 0..pairs {
        let m = biased.means.get(p) as i8;
        let tolerated = tolerate.iter().any(|f| f.pair == p);
        for ci in 0..c {
            for y in 0..kh {
                for x in 0..kw {
                    let even = biased.bank.weights()[[2 * p, ci, y, x]].wrapping_sub(m);
                    let odd = biased.bank.weights()[[2 * p + 1, ci, y, x]].wrapping_sub(m);
                    if even != !odd && !tolerated {
                        return Err(Error::ComplementIntegrity {
                            layer: biased.bank.layer_id().to_string(),
                            pair: p,
                            c: ci,
                            kh: y,
                            kw: x,
                        });
                    }
                    stored[[p, ci, y, x]] = even;
                }
            }
        }
    }
    CompFilterStore::new(
        stored,
        biased.means.clone(),
        biased.scale,
        biased.bank.layer_id(),
    )
}

/// Rebuild the full biased-comp bank from a store.
pub fn reconstruct(store: &CompFilterStore) -> Result<BiasedCompBank> {
    Ok(BiasedCompBank {
        bank: store.reconstruct_biased()?,
        means: store.means().clone(),
        scale: store.scale(),
    })
}

/// One element that failed verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    pub pair: usize,
    pub c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stored: i8,
    pub expected: i8,
}

/// Outcome of [`verify_complementarity`].
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checked: usize,
    pub failures: Vec<VerifyFailure>,
    pub total_failures: usize,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.total_failures == 0
    }
}

const MAX_REPORTED_FAILURES: usize = 10;

/// Check a store against the biased-comp bank it was decomposed from:
/// stored and implicit bytes must XOR to 0xFF, and the round trip
/// `stored + M` / `!stored + M` must reproduce the source bank exactly.
pub fn verify_complementarity(
    store: &CompFilterStore,
    source: &BiasedCompBank,
) -> Result<VerifyReport> {
    let pairs = source.means.len();
    if store.stored().dim().0 != pairs
        || store.stored().raw_dim() != {
            let (_, c, kh, kw) = source.bank.dims();
            ndarray::Ix4(pairs, c, kh, kw)
        }
    {
        return Err(Error::DimensionMismatch {
            context: format!("verify for layer {}", store.layer_id()),
            expected: format!("{:?}", source.bank.dims()),
            got: format!("{:?}", store.stored().dim()),
        });
    }
    let (_, c, kh, kw) = source.bank.dims();
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let mut total = 0usize;
    for p in 0..pairs {
        let m = store.means().get(p) as i8;
        for ci in 0..c {
            for y in 0..kh {
                for x in 0..kw {
                    checked += 1;
                    let stored = store.stored()[[p, ci, y, x]];
                    let implicit = !stored;
                    let even_ok =
                        stored.wrapping_add(m) == source.bank.weights()[[2 * p, ci, y, x]];
                    let odd_ok =
                        implicit.wrapping_add(m) == source.bank.weights()[[2 * p + 1, ci, y, x]];
                    debug_assert_eq!(stored ^ implicit, !0i8);
                    if !(even_ok && odd_ok) {
                        total += 1;
                        if failures.len() < MAX_REPORTED_FAILURES {
                            failures.push(VerifyFailure {
                                pair: p,
                                c: ci,
                                kh: y,
                                kw: x,
                                stored,
                                expected: source.bank.weights()[[2 * p, ci, y, x]].wrapping_sub(m),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(VerifyReport {
        checked,
        failures,
        total_failures: total,
    })
}

/// L1 distortion introduced by complementization, per pair.
#[derive(Debug, Clone)]
pub struct DistortionStats {
    pub elements_per_pair: usize,
    pub l1_per_pair: Vec<u64>,
}

impl DistortionStats {
    /// Complementization changes exactly one twin of every element pair by
    /// exactly one, so each pair's L1 distortion equals its element count.
    pub fn is_uniform_minus_one(&self) -> bool {
        self.l1_per_pair
            .iter()
            .all(|&l1| l1 == self.elements_per_pair as u64)
    }
}

fn distortion(before: &FilterBank<i8>, after: &FilterBank<i8>) -> DistortionStats {
    let (n, c, kh, kw) = before.dims();
    let mut l1 = vec![0u64; n / 2];
    for ((idx, &b), &a) in before.weights().indexed_iter().zip(after.weights().iter()) {
        l1[idx.0 / 2] += (i64::from(b) - i64::from(a)).unsigned_abs();
    }
    DistortionStats {
        elements_per_pair: c * kh * kw,
        l1_per_pair: l1,
    }
}

/// Every intermediate artifact of the full transformation, kept for
/// tracing, reporting, and verification.
#[derive(Debug, Clone)]
pub struct TransformOutcome<R: Real> {
    pub float_means: PairMeans<R>,
    pub float_symmetric: FilterBank<R>,
    pub quantized: FilterBank<i8>,
    pub scale: R,
    pub int_means: PairMeans<i16>,
    pub int_symmetric: FilterBank<i8>,
    pub flagged: Vec<FlaggedPair>,
    pub biased: BiasedCompBank,
    pub store: CompFilterStore,
    pub verify: VerifyReport,
    pub distortion: DistortionStats,
}

/// Run the complete transformation on a real-valued bank.
///
/// Means are recomputed after quantization: rounding perturbs both the
/// weights and their pair means, so the integer symmetrization must use
/// integer means or the symmetry it enforces would be off by one.
pub fn transform_bank<R: Real>(bank: &FilterBank<R>) -> Result<TransformOutcome<R>> {
    let float_means = compute_pair_means(bank)?;
    let float_sym = symmetrize(bank, &float_means)?;
    let Quantized {
        bank: quantized,
        scale,
    } = quantize(&float_sym.bank);
    let int_means = compute_pair_means(&quantized)?;
    let int_sym = symmetrize(&quantized, &int_means)?;
    let flagged = int_sym.flagged.clone();
    let comp = complementize(&int_sym, &int_means)?;
    let biased = BiasedCompBank {
        bank: comp,
        means: int_means.clone(),
        scale: scale.to_f64().unwrap_or(1.0),
    };
    let store = decompose(&biased, &flagged)?;
    let verify = verify_complementarity(&store, &biased)?;
    let distortion = distortion(&int_sym.bank, &biased.bank);
    Ok(TransformOutcome {
        float_means,
        float_symmetric: float_sym.bank,
        quantized,
        scale,
        int_means,
        int_symmetric: int_sym.bank,
        flagged,
        biased,
        store,
        verify,
        distortion,
    })
}
