//! Reference fixtures and deterministic random generators for tests, the
//! CLI fixture writer, and the validation driver.

use ndarray::{Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bank::{ActivationTensor, CompFilterStore, FilterBank, PairMeans};
use crate::layer::{LayerKind, LayerSpec};
use crate::scalar::Real;

/// The documented worked example: two 2x2 single-channel filters whose
/// transformation trace is pinned stage by stage in the test suite.
///
/// Filter 0 is `[-1.5, 130, 1.5, 0]`, filter 1 is `[6.5, -130, 1.5, 0]`
/// (row-major). The pair mean is exactly 1.0 and the first element pair
/// walks `(-1.5, 6.5) -> (-4.5, 6.5) -> (-4, 6) -> (-5, 6) -> stored -6
/// (11111010), implicit 5 (00000101)`.
pub fn demo_pair_bank<R: Real>() -> FilterBank<R> {
    let vals = [-1.5, 130.0, 1.5, 0.0, 6.5, -130.0, 1.5, 0.0];
    let weights = Array4::from_shape_vec(
        (2, 1, 2, 2),
        vals.iter().map(|&v| R::from_f64(v).unwrap()).collect(),
    )
    .unwrap();
    FilterBank::new(weights, "demo", true)
}

/// Layer geometry matching [`demo_pair_bank`]: a 2x2 convolution over a 2x2
/// single-channel input, producing one output position.
pub fn demo_layer_spec() -> LayerSpec {
    LayerSpec {
        id: "demo".into(),
        kind: LayerKind::Std,
        h: 2,
        w: 2,
        c: 1,
        n: 2,
        k: 2,
        stride: 1,
        pad: 0,
        fcc_enabled: true,
    }
}

/// Uniform random bank in `[-sigma, sigma]` with a seed derived from the
/// dimensions, so repeated calls in one test agree.
pub fn random_float_bank<R: Real>(
    n: usize,
    c: usize,
    kh: usize,
    kw: usize,
    sigma: f64,
) -> FilterBank<R> {
    let seed = 0x5EED_0000 ^ ((n as u64) << 24 | (c as u64) << 16 | (kh as u64) << 8 | kw as u64);
    random_float_bank_seeded(n, c, kh, kw, sigma, seed)
}

pub fn random_float_bank_seeded<R: Real>(
    n: usize,
    c: usize,
    kh: usize,
    kw: usize,
    sigma: f64,
    seed: u64,
) -> FilterBank<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Array4::from_shape_simple_fn((n, c, kh, kw), || {
        R::from_f64(rng.gen_range(-sigma..=sigma)).unwrap()
    });
    FilterBank::new(weights, "random", true)
}

/// Zero-mean, approximately normal bank with standard deviation `sigma`
/// (sum of twelve uniforms). Trained convolution weights are roughly
/// normal, which is the regime where mirror saturation is rare: the
/// quantization rail sits far out in the tail, so almost no mirrored twin
/// clamps.
pub fn random_normal_bank_seeded<R: Real>(
    n: usize,
    c: usize,
    kh: usize,
    kw: usize,
    sigma: f64,
    seed: u64,
) -> FilterBank<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Array4::from_shape_simple_fn((n, c, kh, kw), || {
        let z: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum::<f64>() - 6.0;
        R::from_f64(z * sigma).unwrap()
    });
    FilterBank::new(weights, "random-normal", true)
}

/// Full-range random int8 activations.
pub fn random_activation(c: usize, h: usize, w: usize, seed: u64) -> ActivationTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ActivationTensor::new(Array3::from_shape_simple_fn((c, h, w), || {
        rng.gen_range(i8::MIN..=i8::MAX)
    }))
}

/// Random plain int8 bank in the quantizer's range `[-127, 127]`.
pub fn random_int_bank(n: usize, c: usize, kh: usize, kw: usize, seed: u64) -> FilterBank<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FilterBank::new(
        Array4::from_shape_simple_fn((n, c, kh, kw), || rng.gen_range(-127i8..=127)),
        "random-int",
        false,
    )
}

/// Random comp store whose reconstruction stays within the 8-bit weight
/// range: means in `[-64, 63]`, stored bytes in `[-64, 63]`.
pub fn random_store(pairs: usize, c: usize, kh: usize, kw: usize, seed: u64) -> CompFilterStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stored = Array4::from_shape_simple_fn((pairs, c, kh, kw), || rng.gen_range(-64i8..=63));
    let means = (0..pairs).map(|_| rng.gen_range(-64i16..=63)).collect();
    CompFilterStore::new(
        stored,
        PairMeans::new(means, "random-store"),
        1.0,
        "random-store",
    )
    .unwrap()
}

/// The same bank under a different layer id, for pairing fixture banks with
/// ad-hoc layer specs.
pub fn retag_bank<T>(bank: FilterBank<T>, id: &str) -> FilterBank<T> {
    let fcc = bank.fcc_enabled();
    FilterBank::new(bank.into_weights(), id, fcc)
}

/// The same store under a different layer id.
pub fn retag_store(store: &CompFilterStore, id: &str) -> CompFilterStore {
    CompFilterStore::new(
        store.stored().clone(),
        PairMeans::new(store.means().values().to_vec(), id),
        store.scale(),
        id,
    )
    .expect("dimensions are unchanged")
}
