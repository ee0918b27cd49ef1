//! Randomized differential validation of the machine route against the
//! reference convolution, with failing-case minimization.
//!
//! A trial draws a random activation tensor, runs the mapped schedule on the
//! bit-level macro models, and compares every output word against the
//! reference. On a mismatch the input is shrunk to the receptive field of
//! the first differing output — everything outside it is zeroed — and the
//! trial is replayed, so a failure report carries the smallest input that
//! still reproduces the disagreement.

use ndarray::Array3;

use crate::bank::{ActivationTensor, OutputTensor};
use crate::config::FeatureConfig;
use crate::error::Result;
use crate::exec::execute;
use crate::fixtures;
use crate::layer::{LayerKind, LayerSpec};
use crate::mapper::{map_layer, LayerWeights, Schedule};
use crate::oracle;

/// Reference output for `weights` on `input`, independent of the machine.
///
/// Plain banks convolve directly. Comp stores convolve the stored/implicit
/// comp filters and then add the window-sum-times-mean recovery term; this
/// route is defined for arbitrary store bytes, including saturation-flagged
/// pairs whose biased form is not representable.
pub fn oracle_output(
    spec: &LayerSpec,
    weights: &LayerWeights,
    input: &ActivationTensor,
) -> Result<OutputTensor> {
    match weights {
        LayerWeights::Plain(bank) => oracle::conv_direct(input, bank, spec),
        LayerWeights::Comp(store) => {
            let comp = oracle::comp_bank(store);
            let raw = oracle::conv_direct(input, &comp, spec)?;
            let sums = oracle::window_sum(input, spec)?;
            oracle::recover(&raw, &sums, store.means())
        }
    }
}

/// One machine/reference disagreement with its minimized reproducer.
#[derive(Debug, Clone)]
pub struct Mismatch {
    pub trial: usize,
    pub seed: u64,
    pub channel: usize,
    pub row: usize,
    pub col: usize,
    pub machine: i32,
    pub expected: i32,
    /// Input zeroed outside the receptive field of the failing output.
    pub minimized: ActivationTensor,
    /// Cells of the original input the minimized tensor keeps.
    pub kept_cells: usize,
    /// Whether the minimized input still reproduces the disagreement.
    pub reproduces: bool,
}

impl Mismatch {
    pub fn describe(&self) -> String {
        format!(
            "trial {} (seed {:#x}): channel {} at ({}, {}) machine {} expected {}; \
             minimized to {} input cells, reproduces: {}",
            self.trial,
            self.seed,
            self.channel,
            self.row,
            self.col,
            self.machine,
            self.expected,
            self.kept_cells,
            self.reproduces
        )
    }
}

/// Outcome of [`validate_layer`].
#[derive(Debug)]
pub struct LayerValidation {
    pub layer_id: String,
    pub mapping: &'static str,
    pub trials: usize,
    pub failed_trials: usize,
    pub first_mismatch: Option<Mismatch>,
}

impl LayerValidation {
    pub fn passed(&self) -> bool {
        self.failed_trials == 0
    }

    pub fn describe(&self) -> String {
        if self.passed() {
            format!(
                "layer {}: {} trials on {} mapping, all outputs bit-exact",
                self.layer_id, self.trials, self.mapping
            )
        } else {
            let detail = self
                .first_mismatch
                .as_ref()
                .map(Mismatch::describe)
                .unwrap_or_default();
            format!(
                "layer {}: {}/{} trials disagreed; first: {}",
                self.layer_id, self.failed_trials, self.trials, detail
            )
        }
    }
}

/// Zero `input` outside the receptive field of output `(channel, row, col)`.
///
/// Shared layers keep the full `C x K x K` window; depthwise layers keep
/// only the failing channel's window. Returns the shrunk tensor and how
/// many cells it kept.
pub fn minimize_input(
    spec: &LayerSpec,
    input: &ActivationTensor,
    channel: usize,
    row: usize,
    col: usize,
) -> (ActivationTensor, usize) {
    let (c_n, h, w) = input.dims();
    let mut data = Array3::<i8>::zeros((c_n, h, w));
    let y0 = (row * spec.stride) as isize - spec.pad as isize;
    let x0 = (col * spec.stride) as isize - spec.pad as isize;
    let mut kept = 0usize;
    for dy in 0..spec.k {
        for dx in 0..spec.k {
            let y = y0 + dy as isize;
            let x = x0 + dx as isize;
            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                continue;
            }
            let (y, x) = (y as usize, x as usize);
            match spec.kind {
                LayerKind::Dw => {
                    data[[channel, y, x]] = input.data()[[channel, y, x]];
                    kept += 1;
                }
                _ => {
                    for c in 0..c_n {
                        data[[c, y, x]] = input.data()[[c, y, x]];
                        kept += 1;
                    }
                }
            }
        }
    }
    (ActivationTensor::new(data), kept)
}

fn first_diff(machine: &OutputTensor, expected: &OutputTensor) -> Option<(usize, usize, usize)> {
    machine
        .data()
        .indexed_iter()
        .zip(expected.data().iter())
        .find(|((_, m), e)| m != e)
        .map(|((idx, _), _)| idx)
}

/// One differential run. `machine_weights` are loaded into the macros and
/// `reference_weights` feed the oracle; validation passes the same weights
/// on both sides, while tests inject corrupted machine weights to exercise
/// the mismatch path.
pub fn differential_trial(
    spec: &LayerSpec,
    schedule: &Schedule,
    machine_weights: &LayerWeights,
    reference_weights: &LayerWeights,
    input: &ActivationTensor,
    trial: usize,
    seed: u64,
) -> Result<Option<Mismatch>> {
    let result = execute(spec, schedule, machine_weights, input, false)?;
    let expected = oracle_output(spec, reference_weights, input)?;
    let Some((channel, row, col)) = first_diff(&result.output, &expected) else {
        return Ok(None);
    };
    let machine = result.output.data()[[channel, row, col]];
    let want = expected.data()[[channel, row, col]];
    let (minimized, kept_cells) = minimize_input(spec, input, channel, row, col);
    let re_machine = execute(spec, schedule, machine_weights, &minimized, false)?;
    let re_expected = oracle_output(spec, reference_weights, &minimized)?;
    let reproduces =
        re_machine.output.data()[[channel, row, col]] != re_expected.data()[[channel, row, col]];
    Ok(Some(Mismatch {
        trial,
        seed,
        channel,
        row,
        col,
        machine,
        expected: want,
        minimized,
        kept_cells,
        reproduces,
    }))
}

/// Run `trials` random-input differential trials of one mapped layer.
pub fn validate_layer(
    spec: &LayerSpec,
    weights: &LayerWeights,
    features: &FeatureConfig,
    trials: usize,
    seed: u64,
) -> Result<LayerValidation> {
    validate_layer_against(spec, weights, weights, features, trials, seed)
}

/// [`validate_layer`] with distinct machine and reference weights: the
/// machine runs `machine_weights` (e.g. artifacts read back from disk)
/// while the oracle runs `reference_weights` (the expected bank), so a
/// corrupted artifact surfaces as a mismatch instead of silently agreeing
/// with itself.
pub fn validate_layer_against(
    spec: &LayerSpec,
    machine_weights: &LayerWeights,
    reference_weights: &LayerWeights,
    features: &FeatureConfig,
    trials: usize,
    seed: u64,
) -> Result<LayerValidation> {
    let schedule = map_layer(spec, machine_weights, features)?;
    let mut failed = 0usize;
    let mut first = None;
    for t in 0..trials {
        let trial_seed = seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let input = fixtures::random_activation(spec.c, spec.h, spec.w, trial_seed);
        if let Some(mm) = differential_trial(
            spec,
            &schedule,
            machine_weights,
            reference_weights,
            &input,
            t,
            trial_seed,
        )? {
            failed += 1;
            if first.is_none() {
                first = Some(mm);
            }
        }
    }
    Ok(LayerValidation {
        layer_id: spec.id.clone(),
        mapping: schedule.mapping,
        trials,
        failed_trials: failed,
        first_mismatch: first,
    })
}
