//! Cycle accounting and whole-network reports.
//!
//! The model is deliberately simple and fully determined by the schedule
//! structure: weight rows stream through a single write port (loads are
//! serial across macros), compute overlaps across macros (the busiest macro
//! sets the pace), every pass spends one step per input bit plane, and
//! accumulator drains are free by default. All constants scale linearly, so
//! speedup ratios are invariant under retiming.

use crate::config::{ConfigPreset, FeatureConfig};
use crate::error::Result;
use crate::fcc;
use crate::fixtures;
use crate::layer::{LayerKind, LayerSpec};
use crate::mapper::{effective_fcc, map_layer, LayerWeights, Schedule};
use crate::netspec::NetworkSpec;

/// Retiming knobs. Ratios between configurations do not depend on them as
/// long as they are scaled together.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleConstants {
    /// Cycles per weight-memory row-cell write.
    pub write_latency: u64,
    /// Cycles per bit-plane step of a compute pass.
    pub cycles_per_plane: u64,
    /// Cycles to drain accumulators at the end of a phase.
    pub drain_cycles: u64,
}

impl Default for CycleConstants {
    fn default() -> Self {
        CycleConstants {
            write_latency: 1,
            cycles_per_plane: 1,
            drain_cycles: 0,
        }
    }
}

impl CycleConstants {
    /// All constants multiplied by a common retiming factor.
    pub fn scaled(&self, factor: u64) -> Self {
        CycleConstants {
            write_latency: self.write_latency * factor,
            cycles_per_plane: self.cycles_per_plane * factor,
            drain_cycles: self.drain_cycles * factor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerCycles {
    pub load_cycles: u64,
    pub compute_cycles: u64,
}

impl LayerCycles {
    pub fn total(&self) -> u64 {
        self.load_cycles + self.compute_cycles
    }
}

/// Cycle cost of one mapped layer.
pub fn count_cycles(schedule: &Schedule, constants: &CycleConstants) -> LayerCycles {
    let load_cycles = schedule.load_writes * constants.write_latency;
    let compute_cycles =
        schedule.wall_pass_slots * schedule.positions as u64 * 8 * constants.cycles_per_plane
            + schedule.phases.len() as u64 * constants.drain_cycles;
    LayerCycles {
        load_cycles,
        compute_cycles,
    }
}

#[derive(Clone, Debug)]
pub struct LayerReport {
    pub layer_id: String,
    pub kind: LayerKind,
    pub mapping: &'static str,
    pub load_cycles: u64,
    pub compute_cycles: u64,
    pub transfer_bytes: u64,
    pub notes: Vec<String>,
}

impl LayerReport {
    pub fn total(&self) -> u64 {
        self.load_cycles + self.compute_cycles
    }
}

#[derive(Clone, Debug)]
pub struct NetworkReport {
    pub name: String,
    pub config: String,
    pub layers: Vec<LayerReport>,
}

impl NetworkReport {
    pub fn total_load(&self) -> u64 {
        self.layers.iter().map(|l| l.load_cycles).sum()
    }

    pub fn total_compute(&self) -> u64 {
        self.layers.iter().map(|l| l.compute_cycles).sum()
    }

    pub fn total_cycles(&self) -> u64 {
        self.total_load() + self.total_compute()
    }

    pub fn total_transfer(&self) -> u64 {
        self.layers.iter().map(|l| l.transfer_bytes).sum()
    }

    /// Fraction of total cycles spent in depthwise layers.
    pub fn dw_cycle_share(&self) -> f64 {
        let dw: u64 = self
            .layers
            .iter()
            .filter(|l| l.kind == LayerKind::Dw)
            .map(LayerReport::total)
            .sum();
        dw as f64 / self.total_cycles() as f64
    }
}

/// End-to-end speedup of `other` relative to `baseline`.
pub fn speedup(baseline: &NetworkReport, other: &NetworkReport) -> f64 {
    baseline.total_cycles() as f64 / other.total_cycles() as f64
}

/// Per-layer weight seed used by reports, simulation, and the transform
/// command, so artifacts produced by any of them agree byte for byte.
pub fn layer_seed(idx: usize) -> u64 {
    0x9E37_79B9 ^ idx as u64
}

/// The deterministic float bank behind [`synth_layer_weights`].
pub fn synth_layer_bank(spec: &LayerSpec, seed: u64) -> crate::bank::FilterBank<f32> {
    let c = if spec.kind == LayerKind::Dw {
        1
    } else {
        spec.c
    };
    let raw = fixtures::random_float_bank_seeded::<f32>(spec.n, c, spec.k, spec.k, 0.5, seed);
    crate::bank::FilterBank::new(raw.into_weights(), &spec.id, spec.fcc_enabled)
}

/// Deterministic weights for a layer, in the form the feature set needs.
/// Timing depends only on shapes, so synthesized values are fine for
/// reports; simulation uses the same generator so runs are reproducible.
pub fn synth_layer_weights(spec: &LayerSpec, fcc: bool, seed: u64) -> Result<LayerWeights> {
    let bank = synth_layer_bank(spec, seed);
    if fcc {
        let outcome = fcc::transform_bank(&bank)?;
        Ok(LayerWeights::Comp(outcome.store))
    } else {
        let quant = fcc::quantize(&bank);
        Ok(LayerWeights::Plain(quant.bank))
    }
}

/// Map every layer of a network under one feature preset and price it.
pub fn network_report(
    net: &NetworkSpec,
    preset: ConfigPreset,
    constants: &CycleConstants,
) -> Result<NetworkReport> {
    net.validate()?;
    let features: FeatureConfig = preset.features();
    let mut layers = Vec::with_capacity(net.layers.len());
    for (idx, layer) in net.layers.iter().enumerate() {
        let spec = layer.to_spec();
        let fcc = effective_fcc(&spec, &features);
        let weights = synth_layer_weights(&spec, fcc, layer_seed(idx))?;
        let schedule = map_layer(&spec, &weights, &features)?;
        let cycles = count_cycles(&schedule, constants);
        layers.push(LayerReport {
            layer_id: spec.id.clone(),
            kind: spec.kind,
            mapping: schedule.mapping,
            load_cycles: cycles.load_cycles,
            compute_cycles: cycles.compute_cycles,
            transfer_bytes: schedule.transfer_bytes,
            notes: schedule.notes.clone(),
        });
    }
    Ok(NetworkReport {
        name: net.name.clone(),
        config: preset.name().to_string(),
        layers,
    })
}

/// Reports for all four presets, baseline first.
pub fn all_preset_reports(
    net: &NetworkSpec,
    constants: &CycleConstants,
) -> Result<Vec<NetworkReport>> {
    ConfigPreset::ALL
        .iter()
        .map(|p| network_report(net, *p, constants))
        .collect()
}

pub const CSV_HEADER: &str = "layer_id,kind,config,load_cycles,compute_cycles,total,speedup";

/// Per-layer CSV across configurations. The first report is the speedup
/// denominator; a TOTAL row closes each configuration block.
pub fn csv_report(reports: &[NetworkReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let baseline = match reports.first() {
        Some(b) => b,
        None => return out,
    };
    for report in reports {
        for (idx, layer) in report.layers.iter().enumerate() {
            let base_total = baseline.layers[idx].total();
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.4}\n",
                layer.layer_id,
                layer.kind,
                report.config,
                layer.load_cycles,
                layer.compute_cycles,
                layer.total(),
                base_total as f64 / layer.total() as f64,
            ));
        }
        out.push_str(&format!(
            "TOTAL,all,{},{},{},{},{:.4}\n",
            report.config,
            report.total_load(),
            report.total_compute(),
            report.total_cycles(),
            speedup(baseline, report),
        ));
    }
    out
}

/// Human-readable comparison block for one network.
pub fn text_report(reports: &[NetworkReport]) -> String {
    let mut out = String::new();
    let Some(baseline) = reports.first() else {
        return out;
    };
    out.push_str(&format!("network {}\n", baseline.name));
    for report in reports {
        out.push_str(&format!(
            "  {:<9} load {:>12}  compute {:>12}  total {:>12}  transfer {:>10} B  speedup {:.3}\n",
            report.config,
            report.total_load(),
            report.total_compute(),
            report.total_cycles(),
            report.total_transfer(),
            speedup(baseline, report),
        ));
    }
    out
}
