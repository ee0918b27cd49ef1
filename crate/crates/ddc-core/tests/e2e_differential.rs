//! Randomized end-to-end differential sweep over layer geometries.
//!
//! Every sampled layer is mapped, executed on the bit-level machine route
//! under all four feature presets, and compared word-for-word against the
//! reference convolution. Seeds are fixed so any failure is reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddc_core::config::ConfigPreset;
use ddc_core::layer::{LayerKind, LayerSpec};
use ddc_core::mapper::{effective_fcc, map_layer};
use ddc_core::timing::synth_layer_weights;
use ddc_core::validate::validate_layer;

fn sample_spec(rng: &mut ChaCha8Rng, idx: usize) -> LayerSpec {
    let kind = match rng.gen_range(0..4u8) {
        0 => LayerKind::Std,
        1 => LayerKind::Pw,
        2 => LayerKind::Dw,
        _ => LayerKind::Fc,
    };
    // Channel counts are even so the pair transform applies everywhere.
    let (h, w, c, n, k, stride, pad) = match kind {
        LayerKind::Std => {
            let k = [1usize, 2, 3, 5][rng.gen_range(0..4)];
            let h = rng.gen_range(k..=k + 5);
            (
                h,
                h,
                rng.gen_range(1..=10),
                2 * rng.gen_range(1..=8),
                k,
                rng.gen_range(1..=2),
                rng.gen_range(0..=k / 2),
            )
        }
        LayerKind::Pw => {
            let h = rng.gen_range(1..=7);
            (
                h,
                h,
                rng.gen_range(1..=40),
                2 * rng.gen_range(1..=10),
                1,
                1,
                0,
            )
        }
        LayerKind::Dw => {
            // K*K must fit the 32 input lanes of one row.
            let k = [2usize, 3, 4, 5][rng.gen_range(0..4)];
            let h = rng.gen_range(k..=k + 4);
            let c = 2 * rng.gen_range(1..=6);
            (
                h,
                h,
                c,
                c,
                k,
                rng.gen_range(1..=2),
                rng.gen_range(0..=k / 2),
            )
        }
        LayerKind::Fc => (
            1,
            1,
            rng.gen_range(1..=60),
            2 * rng.gen_range(1..=8),
            1,
            1,
            0,
        ),
    };
    LayerSpec {
        id: format!("rand{idx}"),
        kind,
        h,
        w,
        c,
        n,
        k,
        stride,
        pad,
        // Fully connected layers never take complementary storage.
        fcc_enabled: kind != LayerKind::Fc && rng.gen_bool(0.8),
    }
}

#[test]
fn random_layers_are_bit_exact_under_every_preset() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1FF);
    for idx in 0..24 {
        let spec = sample_spec(&mut rng, idx);
        spec.validate().expect("sampled spec must be valid");
        for preset in ConfigPreset::ALL {
            let features = preset.features();
            let fcc = effective_fcc(&spec, &features);
            let weights = synth_layer_weights(&spec, fcc, 0xABCD ^ idx as u64).unwrap();
            let v = validate_layer(&spec, &weights, &features, 2, 0x5A5A ^ idx as u64)
                .unwrap_or_else(|e| panic!("layer {spec:?} under {preset}: {e}"));
            assert!(
                v.passed(),
                "layer {:?} under {}: {}",
                spec,
                preset,
                v.describe()
            );
        }
    }
}

#[test]
fn mapping_choice_tracks_kind_and_preset() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for idx in 0..16 {
        let spec = sample_spec(&mut rng, 1000 + idx);
        for preset in ConfigPreset::ALL {
            let features = preset.features();
            let fcc = effective_fcc(&spec, &features);
            let weights = synth_layer_weights(&spec, fcc, idx as u64).unwrap();
            let schedule = map_layer(&spec, &weights, &features).unwrap();
            let expected: &[&str] = match (spec.kind, fcc) {
                (LayerKind::Dw, false) => &["dw-baseline"],
                (LayerKind::Dw, true) => &["dw-dbis", "dw-split"],
                (_, false) => &["shared-baseline"],
                (_, true) => &["shared-fcc"],
            };
            assert!(
                expected.contains(&schedule.mapping),
                "kind {:?} fcc {} got mapping {}",
                spec.kind,
                fcc,
                schedule.mapping
            );
            if schedule.mapping == "dw-split" {
                assert!(features.reconfig_unit && spec.k * spec.k <= 16);
            }
        }
    }
}
