//! Schedule executor: replays a mapped layer on bit-level macro models.
//!
//! Every phase first writes its rows in normal mode, then sweeps all output
//! positions; each pass streams the 8 input bit planes through the macro,
//! reduces the column vectors, and books the counts into per-channel count
//! grids that a shift-add folds into signed partial sums. The final outputs
//! add the window-sum-times-mean recovery term when the layer ran on a
//! complementary pair store.

use ndarray::{Array2, Array3};

use crate::bank::{ActivationTensor, OutputTensor};
use crate::datapath::{
    aru_recover, bit_planes, im2col, im2col_dw, shift_add, BitSerialStream, CountGrid, WsumAccum,
};
use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};
use crate::mapper::{LayerWeights, PassInput, ReduceGroup, Schedule, NUM_MACROS};
use crate::pim::{adder_reduce, MacroMode, MacroState, ReduceCounts};

/// Execution outcome: bit-exact outputs plus bookkeeping for reports.
#[derive(Debug)]
pub struct ExecResult {
    pub output: OutputTensor,
    pub passes_executed: u64,
    pub planes_executed: u64,
    pub trace: Vec<String>,
}

const TRACE_CAP: usize = 20_000;

struct Tracer {
    enabled: bool,
    lines: Vec<String>,
}

impl Tracer {
    fn push(&mut self, f: impl FnOnce() -> String) {
        if !self.enabled {
            return;
        }
        if self.lines.len() == TRACE_CAP {
            self.lines.push("... trace truncated".into());
        }
        if self.lines.len() <= TRACE_CAP {
            self.lines.push(f());
        }
    }
}

/// Per-pass count accumulation for the handful of channels a pass serves.
#[derive(Default)]
struct PassGrids {
    grids: Vec<(usize, CountGrid)>,
}

impl PassGrids {
    fn add(&mut self, channel: usize, plane: usize, bit: usize, count: u32) {
        if count == 0 {
            return;
        }
        let grid = match self.grids.iter_mut().find(|(c, _)| *c == channel) {
            Some((_, g)) => g,
            None => {
                self.grids.push((channel, [[0; 8]; 8]));
                &mut self.grids.last_mut().unwrap().1
            }
        };
        grid[plane][bit] += count;
    }
}

fn binding_count(counts: &ReduceCounts, column: usize, group: ReduceGroup) -> Result<u32> {
    match (counts, group) {
        (ReduceCounts::Combined(v), ReduceGroup::All32) => Ok(v[column]),
        (ReduceCounts::Split(v), ReduceGroup::Lo16) => Ok(v[column].0),
        (ReduceCounts::Split(v), ReduceGroup::Hi16) => Ok(v[column].1),
        _ => Err(Error::ModeViolation {
            operation: "binding readout".into(),
            required: "matching adder-tree configuration".into(),
            actual: "mismatched reduce group".into(),
        }),
    }
}

/// Run `schedule` for `spec` with the same weights it was mapped from.
pub fn execute(
    spec: &LayerSpec,
    schedule: &Schedule,
    weights: &LayerWeights,
    input: &ActivationTensor,
    trace: bool,
) -> Result<ExecResult> {
    spec.validate()?;
    if schedule.layer_id != spec.id || weights.layer_id() != spec.id {
        return Err(Error::ScheduleConfig {
            layer: spec.id.clone(),
            reason: format!(
                "schedule is for {:?} and weights for {:?}",
                schedule.layer_id,
                weights.layer_id()
            ),
        });
    }
    if schedule.positions != spec.positions() {
        return Err(Error::ScheduleConfig {
            layer: spec.id.clone(),
            reason: "schedule position count does not match the layer geometry".into(),
        });
    }
    let positions = spec.positions();
    let is_dw = spec.kind == LayerKind::Dw;

    // Input bit planes. Shared layers stream the im2col vector in 32-lane
    // chunks; depthwise layers present one window per (channel, position).
    let (streams, dw_masks) = if is_dw {
        let cols = im2col_dw(input, spec)?;
        let mut masks = vec![[0u32; 8]; spec.c * positions];
        for c in 0..spec.c {
            for p in 0..positions {
                let window: Vec<i8> = cols.slice(ndarray::s![c, p, ..]).to_vec();
                masks[c * positions + p] = bit_planes(&window)?;
            }
        }
        (Vec::new(), masks)
    } else {
        let cols = im2col(input, spec)?;
        let streams = (0..positions)
            .map(|p| BitSerialStream::from_values(&cols.row(p).to_vec()))
            .collect::<Vec<_>>();
        (streams, Vec::new())
    };

    // Window sums, needed only for mean recovery on comp stores.
    let wsums: Option<Array2<i32>> = if schedule.uses_comp_store {
        let mut sums = Array2::<i32>::zeros((if is_dw { spec.c } else { 1 }, positions));
        if is_dw {
            for c in 0..spec.c {
                for p in 0..positions {
                    let mut acc = WsumAccum::default();
                    for (k, plane) in dw_masks[c * positions + p].iter().enumerate() {
                        acc.add_plane(k, plane.count_ones());
                    }
                    sums[[c, p]] = acc.value();
                }
            }
        } else {
            for (p, stream) in streams.iter().enumerate() {
                let mut acc = WsumAccum::default();
                for t in 0..stream.chunks() {
                    for k in 0..8 {
                        acc.add_plane(k, stream.plane(t, k).count_ones());
                    }
                }
                sums[[0, p]] = acc.value();
            }
        }
        Some(sums)
    } else {
        None
    };

    let mut macros: Vec<MacroState> = (0..NUM_MACROS).map(|_| MacroState::new()).collect();
    let mut psums = Array2::<i64>::zeros((spec.n, positions));
    let mut tracer = Tracer {
        enabled: trace,
        lines: Vec::new(),
    };
    let mut passes_executed = 0u64;

    for (phase_idx, phase) in schedule.phases.iter().enumerate() {
        for m in macros.iter_mut() {
            m.set_mode(MacroMode::Normal);
        }
        for load in &phase.loads {
            macros[load.macro_id].write_row(load.compartment, load.row, load.image)?;
        }
        tracer.push(|| {
            format!(
                "phase {phase_idx}: loaded {} rows, {} passes/position",
                phase.loads.len(),
                phase.templates.len()
            )
        });
        for p in 0..positions {
            for template in &phase.templates {
                macros[template.macro_id].set_mode(template.mode);
                let mut grids = PassGrids::default();
                // `k` is the bit-plane index, not a position in `dw_masks`.
                #[allow(clippy::needless_range_loop)]
                for k in 0..8 {
                    let (inp, inn) = match &template.input {
                        PassInput::Chunk(t) => {
                            let m = if *t < streams[p].chunks() {
                                streams[p].plane(*t, k)
                            } else {
                                0
                            };
                            (m, m)
                        }
                        PassInput::Windows(feeds) => {
                            let mut inp = 0u32;
                            let mut inn = 0u32;
                            for feed in feeds {
                                inp |= dw_masks[feed.inp_channel * positions + p][k] << feed.base;
                                if let Some(ch) = feed.inn_channel {
                                    inn |= dw_masks[ch * positions + p][k] << feed.base;
                                }
                            }
                            (inp, inn)
                        }
                    };
                    let columns = match template.mode {
                        MacroMode::Regular => {
                            macros[template.macro_id].compute_regular(&template.rows, inp)?
                        }
                        MacroMode::Double => {
                            macros[template.macro_id].compute_double(&template.rows, inp, inn)?
                        }
                        MacroMode::Normal => {
                            return Err(Error::ModeViolation {
                                operation: "pass execution".into(),
                                required: "regular or double".into(),
                                actual: "normal".into(),
                            })
                        }
                    };
                    let counts = adder_reduce(&columns, template.reduce);
                    for b in &template.bindings {
                        let count = binding_count(&counts, b.column, b.group)?;
                        grids.add(b.channel, k, b.weight_bit, count);
                    }
                }
                for (channel, grid) in &grids.grids {
                    let contribution = shift_add(grid);
                    psums[[*channel, p]] += i64::from(contribution);
                    tracer.push(|| {
                        format!(
                            "phase {phase_idx} pos {p} macro {} {:?}: psum[{channel}] += {contribution}",
                            template.macro_id, template.mode
                        )
                    });
                }
                passes_executed += 1;
            }
        }
    }

    let (oh_n, ow_n) = (spec.out_h(), spec.out_w());
    let mut out = Array3::<i32>::zeros((spec.n, oh_n, ow_n));
    for j in 0..spec.n {
        for p in 0..positions {
            let psum = i32::try_from(psums[[j, p]]).map_err(|_| Error::AccumulatorGuard {
                layer: spec.id.clone(),
                len: spec.vec_len(),
            })?;
            let value = match (&wsums, weights.means()) {
                (Some(sums), Some(means)) => {
                    let row = if is_dw { j } else { 0 };
                    aru_recover(psum, sums[[row, p]], means.for_channel(j))
                }
                _ => psum,
            };
            out[[j, p / ow_n, p % ow_n]] = value;
        }
    }
    tracer.push(|| {
        format!(
            "done: {passes_executed} passes, {} planes",
            passes_executed * 8
        )
    });
    Ok(ExecResult {
        output: OutputTensor::new(out),
        passes_executed,
        planes_executed: passes_executed * 8,
        trace: tracer.lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigPreset;
    use crate::fcc;
    use crate::fixtures;
    use crate::mapper::map_layer;
    use crate::oracle;

    fn spec(
        kind: LayerKind,
        h: usize,
        c: usize,
        n: usize,
        k: usize,
        stride: usize,
        fcc_on: bool,
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
            pad: if k > 1 { 1 } else { 0 },
            fcc_enabled: fcc_on,
        }
    }

    /// Random plain int8 weights tagged with the spec's layer id.
    fn plain_weights(spec: &LayerSpec, seed: u64) -> LayerWeights {
        let c = if spec.kind == LayerKind::Dw {
            1
        } else {
            spec.c
        };
        LayerWeights::Plain(fixtures::retag_bank(
            fixtures::random_int_bank(spec.n, c, spec.k, spec.k, seed),
            &spec.id,
        ))
    }

    /// Arbitrary store bytes tagged with the spec's layer id.
    fn raw_store_weights(spec: &LayerSpec, seed: u64) -> LayerWeights {
        let c = if spec.kind == LayerKind::Dw {
            1
        } else {
            spec.c
        };
        LayerWeights::Comp(fixtures::retag_store(
            &fixtures::random_store(spec.n / 2, c, spec.k, spec.k, seed),
            &spec.id,
        ))
    }

    /// A store produced by the real weight transformation.
    fn transformed_weights(spec: &LayerSpec, sigma: f64) -> LayerWeights {
        let c = if spec.kind == LayerKind::Dw {
            1
        } else {
            spec.c
        };
        let bank = fixtures::retag_bank(
            fixtures::random_float_bank::<f32>(spec.n, c, spec.k, spec.k, sigma),
            &spec.id,
        );
        LayerWeights::Comp(fcc::transform_bank(&bank).unwrap().store)
    }

    /// Run the full machine route and the reference route; they must agree
    /// bit for bit.
    fn assert_machine_matches_oracle(
        spec: &LayerSpec,
        weights: &LayerWeights,
        preset: ConfigPreset,
        seed: u64,
    ) {
        let input = fixtures::random_activation(spec.c, spec.h, spec.w, seed);
        let schedule = map_layer(spec, weights, &preset.features()).unwrap();
        let result = execute(spec, &schedule, weights, &input, false).unwrap();
        // Comp stores go through the universal reference route (comp-filter
        // convolution plus window-sum recovery), which is defined for any
        // store bytes; `reconstruct_biased` is not when saturation wrapped.
        let reference = match weights {
            LayerWeights::Plain(bank) => oracle::conv_direct(&input, bank, spec).unwrap(),
            LayerWeights::Comp(store) => {
                let comp = oracle::comp_bank(store);
                let raw = oracle::conv_direct(&input, &comp, spec).unwrap();
                let sums = oracle::window_sum(&input, spec).unwrap();
                oracle::recover(&raw, &sums, store.means()).unwrap()
            }
        };
        assert_eq!(result.output, reference, "layer {} mismatch", spec.id);
    }

    #[test]
    fn baseline_std_matches_reference() {
        let spec = spec(LayerKind::Std, 6, 3, 5, 3, 1, false);
        let weights = plain_weights(&spec, 10);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Baseline, 11);
    }

    #[test]
    fn baseline_std_stride_two_matches_reference() {
        let spec = spec(LayerKind::Std, 9, 4, 6, 3, 2, false);
        let weights = plain_weights(&spec, 12);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Baseline, 13);
    }

    #[test]
    fn fcc_std_matches_reconstructed_reference() {
        let spec = spec(LayerKind::Std, 6, 3, 8, 3, 1, true);
        let weights = transformed_weights(&spec, 0.7);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Fcc, 14);
    }

    #[test]
    fn fcc_multi_chunk_pw_matches_reference() {
        // C 72 -> 3 chunks per quad; exercises partial-lane chunks too.
        let spec = spec(LayerKind::Pw, 5, 72, 12, 1, 1, true);
        let weights = transformed_weights(&spec, 0.9);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Fcc, 15);
    }

    #[test]
    fn fcc_on_raw_random_store_matches_reference() {
        // The machine/reference agreement holds for arbitrary store bytes,
        // not just stores produced by the weight transform.
        let spec = spec(LayerKind::Std, 5, 2, 6, 3, 1, true);
        let weights = raw_store_weights(&spec, 16);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Fcc, 17);
    }

    #[test]
    fn fc_matches_reference() {
        let spec = spec(LayerKind::Fc, 1, 40, 10, 1, 1, false);
        let weights = plain_weights(&spec, 18);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Full, 19);
    }

    #[test]
    fn dw_baseline_matches_reference() {
        let spec = spec(LayerKind::Dw, 6, 5, 5, 3, 1, false);
        let weights = plain_weights(&spec, 20);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Baseline, 21);
    }

    #[test]
    fn dw_dbis_matches_reference() {
        let spec = spec(LayerKind::Dw, 6, 8, 8, 3, 1, true);
        let weights = raw_store_weights(&spec, 22);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::FccDbis, 23);
    }

    #[test]
    fn dw_split_matches_reference() {
        let spec = spec(LayerKind::Dw, 6, 8, 8, 3, 1, true);
        let weights = raw_store_weights(&spec, 24);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Full, 25);
    }

    #[test]
    fn dw_split_partial_quad_matches_reference() {
        let spec = spec(LayerKind::Dw, 6, 6, 6, 3, 1, true);
        let weights = raw_store_weights(&spec, 26);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Full, 27);
    }

    #[test]
    fn dw_split_k4_window_fills_half_exactly() {
        let spec = spec(LayerKind::Dw, 8, 8, 8, 4, 2, true);
        let weights = raw_store_weights(&spec, 28);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Full, 29);
    }

    #[test]
    fn dw_k5_falls_back_and_matches_reference() {
        let spec = spec(LayerKind::Dw, 8, 4, 4, 5, 1, true);
        let weights = raw_store_weights(&spec, 30);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Full, 31);
    }

    #[test]
    fn multi_phase_reload_keeps_results_exact() {
        // 320 units force two phases; stale cells from phase one must not
        // leak into phase two's partial rows.
        let spec = spec(LayerKind::Pw, 2, 128, 320, 1, 1, true);
        let weights = transformed_weights(&spec, 0.6);
        assert_machine_matches_oracle(&spec, &weights, ConfigPreset::Fcc, 32);
    }

    #[test]
    fn golden_demo_pipeline_is_bit_exact() {
        let spec = fixtures::demo_layer_spec();
        let bank = fixtures::demo_pair_bank::<f32>();
        let outcome = fcc::transform_bank(&bank).unwrap();
        let weights = LayerWeights::Comp(outcome.store.clone());
        let schedule = map_layer(&spec, &weights, &ConfigPreset::Fcc.features()).unwrap();
        let input = fixtures::random_activation(spec.c, spec.h, spec.w, 33);
        let result = execute(&spec, &schedule, &weights, &input, true).unwrap();
        let biased = outcome.store.reconstruct_biased().unwrap();
        let reference = oracle::conv_direct(&input, &biased, &spec).unwrap();
        assert_eq!(result.output, reference);
        assert!(!result.trace.is_empty());
        assert!(result.trace.iter().any(|l| l.contains("psum")));
    }

    #[test]
    fn executor_rejects_mismatched_artifacts() {
        let spec_a = spec(LayerKind::Std, 6, 3, 4, 3, 1, false);
        let weights = plain_weights(&spec_a, 34);
        let schedule = map_layer(&spec_a, &weights, &ConfigPreset::Baseline.features()).unwrap();
        let mut spec_b = spec_a.clone();
        spec_b.id = "other".into();
        let input = fixtures::random_activation(3, 6, 6, 35);
        assert!(execute(&spec_b, &schedule, &weights, &input, false).is_err());
        let bad_input = fixtures::random_activation(3, 5, 5, 36);
        assert!(execute(&spec_a, &schedule, &weights, &bad_input, false).is_err());
    }

    #[test]
    fn pass_accounting_matches_schedule() {
        let spec = spec(LayerKind::Std, 6, 3, 8, 3, 1, true);
        let weights = transformed_weights(&spec, 0.5);
        let schedule = map_layer(&spec, &weights, &ConfigPreset::Fcc.features()).unwrap();
        let input = fixtures::random_activation(3, 6, 6, 37);
        let result = execute(&spec, &schedule, &weights, &input, false).unwrap();
        assert_eq!(
            result.passes_executed,
            schedule.total_passes * spec.positions() as u64
        );
        assert_eq!(result.planes_executed, result.passes_executed * 8);
    }
}
