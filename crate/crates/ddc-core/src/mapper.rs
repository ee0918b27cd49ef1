//! Layer-to-array mapping: turns a layer plus its prepared weights into a
//! concrete schedule of row loads and compute passes over four macros.
//!
//! Shared-filter layers (std/pw/fc) flatten each filter channel-major and
//! spread 32-element chunks round-robin across macros, so one pass consumes
//! one chunk of the im2col vector against one stored row. Depthwise layers
//! keep all window elements of one window in one macro's compartments and
//! iterate channels.

use crate::bank::{CompFilterStore, FilterBank, PairMeans};
use crate::config::FeatureConfig;
use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};
use crate::pim::{
    MacroMode, ReduceMode, RowImage, RowSelect, Stage, COMPARTMENTS, ROWS_PER_COMPARTMENT,
};

/// Macros ganged behind one weight-memory port.
pub const NUM_MACROS: usize = 4;
/// Rows loadable per phase across all macros.
pub const PHASE_ROW_CAPACITY: usize = NUM_MACROS * ROWS_PER_COMPARTMENT;
/// Staging buffer for activations, bytes.
pub const ACTIVATION_BUFFER_BYTES: usize = 64 * 1024;

/// Weights in the form a given mapping consumes.
#[derive(Clone, Debug)]
pub enum LayerWeights {
    /// Plain per-filter bytes (baseline storage, two filters per row).
    Plain(FilterBank<i8>),
    /// Complementary pair store (one byte per pair plus pair means).
    Comp(CompFilterStore),
}

impl LayerWeights {
    pub fn layer_id(&self) -> &str {
        match self {
            LayerWeights::Plain(b) => b.layer_id(),
            LayerWeights::Comp(s) => s.layer_id(),
        }
    }

    pub fn is_comp(&self) -> bool {
        matches!(self, LayerWeights::Comp(_))
    }

    pub fn means(&self) -> Option<&PairMeans<i16>> {
        match self {
            LayerWeights::Plain(_) => None,
            LayerWeights::Comp(s) => Some(s.means()),
        }
    }
}

/// Whether this layer actually runs complementary storage under the given
/// feature set: the layer must opt in and the matching mechanism must be on.
pub fn effective_fcc(spec: &LayerSpec, features: &FeatureConfig) -> bool {
    spec.fcc_enabled
        && match spec.kind {
            LayerKind::Std | LayerKind::Pw => features.fcc_std_pw,
            LayerKind::Dw => features.fcc_dw_dbis,
            LayerKind::Fc => false,
        }
}

/// One weight-memory write: place `image` at (macro, compartment, row).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadStep {
    pub macro_id: usize,
    pub compartment: usize,
    pub row: usize,
    pub image: RowImage,
}

/// Input routing for a depthwise pass: window elements of `inp_channel`
/// (and, double mode, `inn_channel`) land on lanes `base..base+len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowFeed {
    pub base: usize,
    pub len: usize,
    pub inp_channel: usize,
    pub inn_channel: Option<usize>,
}

/// Where a pass's input bits come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PassInput {
    /// Chunk `t` of the shared im2col vector (lanes = elements `32t..`),
    /// presented identically on both input polarities.
    Chunk(usize),
    /// Per-compartment window feeds (depthwise).
    Windows(Vec<WindowFeed>),
}

/// Which half of the adder tree a binding reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceGroup {
    All32,
    Lo16,
    Hi16,
}

/// Route one logical column's count into (channel, weight bit).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputBinding {
    pub column: usize,
    pub group: ReduceGroup,
    pub channel: usize,
    pub weight_bit: usize,
}

/// One compute pass, executed once per output position (8 planes).
#[derive(Clone, Debug)]
pub struct PassTemplate {
    pub macro_id: usize,
    pub mode: MacroMode,
    pub reduce: ReduceMode,
    pub rows: RowSelect,
    pub input: PassInput,
    pub bindings: Vec<OutputBinding>,
}

/// Load-then-compute unit: rows written once, passes swept over positions.
#[derive(Clone, Debug, Default)]
pub struct Phase {
    pub loads: Vec<LoadStep>,
    pub templates: Vec<PassTemplate>,
}

impl Phase {
    /// Pass slots this phase adds to the critical path per position: macros
    /// run concurrently, so it is the busiest macro's template count.
    pub fn wall_slots(&self) -> u64 {
        let mut per_macro = [0u64; NUM_MACROS];
        for t in &self.templates {
            per_macro[t.macro_id] += 1;
        }
        per_macro.into_iter().max().unwrap_or(0)
    }
}

/// Peak concurrency achieved by the mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parallelism {
    pub compartments: usize,
    pub macros: usize,
    pub columns: usize,
}

impl Parallelism {
    pub fn concurrent_macs(&self) -> usize {
        self.compartments * self.macros * self.columns
    }
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub layer_id: String,
    pub kind: LayerKind,
    /// Human-readable mapping name: shared-baseline, shared-fcc,
    /// dw-baseline, dw-dbis, or dw-split.
    pub mapping: &'static str,
    pub uses_comp_store: bool,
    pub positions: usize,
    pub phases: Vec<Phase>,
    pub parallelism: Parallelism,
    /// Critical-path pass slots per position, summed over phases.
    pub wall_pass_slots: u64,
    pub total_passes: u64,
    /// Weight-memory writes (row cells touched).
    pub load_writes: u64,
    /// Weight bytes moved from off-macro memory, means included.
    pub transfer_bytes: u64,
    /// Portion of `transfer_bytes` that is pair means.
    pub means_bytes: u64,
    pub notes: Vec<String>,
}

impl Schedule {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "layer {} kind {} mapping {}\n",
            self.layer_id, self.kind, self.mapping
        ));
        s.push_str(&format!(
            "  positions {}  phases {}  passes/pos {}  total passes {}\n",
            self.positions,
            self.phases.len(),
            self.wall_pass_slots,
            self.total_passes
        ));
        s.push_str(&format!(
            "  load writes {}  transfer bytes {} (means {})\n",
            self.load_writes, self.transfer_bytes, self.means_bytes
        ));
        s.push_str(&format!(
            "  parallelism {}x{}x{} = {} MACs\n",
            self.parallelism.compartments,
            self.parallelism.macros,
            self.parallelism.columns,
            self.parallelism.concurrent_macs()
        ));
        for note in &self.notes {
            s.push_str(&format!("  note: {note}\n"));
        }
        s
    }
}

fn want_dims(spec: &LayerSpec, comp: bool) -> (usize, usize, usize, usize) {
    let c = if spec.kind == LayerKind::Dw {
        1
    } else {
        spec.c
    };
    let n = if comp { spec.n / 2 } else { spec.n };
    (n, c, spec.k, spec.k)
}

fn check_weights(spec: &LayerSpec, weights: &LayerWeights) -> Result<()> {
    let (want, got) = match weights {
        LayerWeights::Plain(b) => (want_dims(spec, false), b.dims()),
        LayerWeights::Comp(s) => (want_dims(spec, true), s.stored().dim()),
    };
    if want != got {
        return Err(Error::DimensionMismatch {
            context: format!("mapping weights for layer {}", spec.id),
            expected: format!("{want:?}"),
            got: format!("{got:?}"),
        });
    }
    Ok(())
}

/// Build the full schedule for one layer under one feature configuration.
///
/// The weight form must match the effective mechanism: comp stores map only
/// when complementary compute is on for this layer kind, plain banks only
/// when it is off.
pub fn map_layer(
    spec: &LayerSpec,
    weights: &LayerWeights,
    features: &FeatureConfig,
) -> Result<Schedule> {
    spec.validate()?;
    features.validate()?;
    check_weights(spec, weights)?;
    let fcc = effective_fcc(spec, features);
    if fcc != weights.is_comp() {
        return Err(Error::ScheduleConfig {
            layer: spec.id.clone(),
            reason: format!(
                "weights are {} but the configuration calls for {}",
                if weights.is_comp() {
                    "pair-comp"
                } else {
                    "plain"
                },
                if fcc {
                    "pair-comp storage"
                } else {
                    "plain storage"
                }
            ),
        });
    }
    let mut schedule = match (spec.kind, weights) {
        (LayerKind::Dw, LayerWeights::Plain(bank)) => map_dw_baseline(spec, bank),
        (LayerKind::Dw, LayerWeights::Comp(store)) => map_dw_comp(spec, store, features),
        (_, LayerWeights::Plain(bank)) => map_shared(spec, SharedSource::Plain(bank)),
        (_, LayerWeights::Comp(store)) => map_shared(spec, SharedSource::Comp(store)),
    }?;
    let activation_bytes = spec.c * spec.h * spec.w;
    if activation_bytes > ACTIVATION_BUFFER_BYTES {
        schedule.notes.push(format!(
            "activation tensor ({activation_bytes} B) exceeds the {ACTIVATION_BUFFER_BYTES} B staging buffer; modeled as streamed"
        ));
    }
    schedule.wall_pass_slots = schedule.phases.iter().map(Phase::wall_slots).sum();
    schedule.total_passes = schedule
        .phases
        .iter()
        .map(|p| p.templates.len() as u64)
        .sum();
    schedule.load_writes = schedule.phases.iter().map(|p| p.loads.len() as u64).sum();
    Ok(schedule)
}

enum SharedSource<'a> {
    Plain(&'a FilterBank<i8>),
    Comp(&'a CompFilterStore),
}

/// Byte vectors for one row-packed slot: filter (or pair) `a` plus an
/// optional partner `b` sharing the row.
type SlotPair = (Vec<i8>, Option<Vec<i8>>);
type BindingsFn = fn(usize, usize) -> Vec<OutputBinding>;

/// std/pw/fc mapping. Baseline rows pack two filters' bytes; comp rows pack
/// two pairs' stored bytes and double mode serves four channels per row.
fn map_shared(spec: &LayerSpec, source: SharedSource<'_>) -> Result<Schedule> {
    let l = spec.vec_len();
    let chunks = l.div_ceil(32);
    // Flattened byte vectors, one per row-packed slot pair (a, b).
    let (groups, slot_bytes, mapping, bindings_for): (
        usize,
        Vec<SlotPair>,
        &'static str,
        BindingsFn,
    ) = match source {
        SharedSource::Plain(bank) => {
            let groups = spec.n.div_ceil(2);
            let bytes = (0..groups)
                .map(|g| {
                    let a = bank.flatten_filter(2 * g);
                    let b = (2 * g + 1 < spec.n).then(|| bank.flatten_filter(2 * g + 1));
                    (a, b)
                })
                .collect();
            (groups, bytes, "shared-baseline", shared_baseline_bindings)
        }
        SharedSource::Comp(store) => {
            let pairs = store.stored().dim().0;
            let groups = pairs.div_ceil(2);
            let bytes = (0..groups)
                .map(|g| {
                    let a = store.flatten_stored(2 * g);
                    let b = (2 * g + 1 < pairs).then(|| store.flatten_stored(2 * g + 1));
                    (a, b)
                })
                .collect();
            (groups, bytes, "shared-fcc", shared_fcc_bindings)
        }
    };
    let fcc = matches!(source, SharedSource::Comp(_));
    let total_units = groups * chunks;
    let mut phases = Vec::new();
    let mut unit = 0usize;
    while unit < total_units {
        let count = (total_units - unit).min(PHASE_ROW_CAPACITY);
        let mut phase = Phase::default();
        for ul in 0..count {
            let u = unit + ul;
            let (g, chunk) = (u / chunks, u % chunks);
            let macro_id = ul % NUM_MACROS;
            let row = ul / NUM_MACROS;
            let base = chunk * 32;
            let len = (l - base).min(32);
            let (a, b) = &slot_bytes[g];
            for i in 0..len {
                let byte_b = b.as_ref().map_or(0, |v| v[base + i]);
                phase.loads.push(LoadStep {
                    macro_id,
                    compartment: i,
                    row,
                    image: RowImage::pack(a[base + i], byte_b),
                });
            }
            let mut rows: RowSelect = [None; COMPARTMENTS];
            for slot in rows.iter_mut().take(len) {
                *slot = Some(row as u8);
            }
            let mut bindings = bindings_for(g, spec.n);
            if b.is_none() {
                // Dead byte slot: keep only slot-A channels.
                let live = if fcc { 4 * g + 2 } else { 2 * g + 1 };
                bindings.retain(|bd| bd.channel < live);
            }
            phase.templates.push(PassTemplate {
                macro_id,
                mode: if fcc {
                    MacroMode::Double
                } else {
                    MacroMode::Regular
                },
                reduce: ReduceMode::Combined,
                rows,
                input: PassInput::Chunk(chunk),
                bindings,
            });
        }
        phases.push(phase);
        unit += count;
    }
    let (transfer, means_bytes) = match source {
        SharedSource::Plain(_) => ((spec.n * l) as u64, 0u64),
        SharedSource::Comp(store) => {
            let pairs = store.stored().dim().0 as u64;
            (pairs * l as u64 + 2 * pairs, 2 * pairs)
        }
    };
    Ok(Schedule {
        layer_id: spec.id.clone(),
        kind: spec.kind,
        mapping,
        uses_comp_store: fcc,
        positions: spec.positions(),
        phases,
        parallelism: Parallelism {
            compartments: COMPARTMENTS.min(l),
            macros: NUM_MACROS.min(total_units),
            columns: if fcc { 32 } else { 16 },
        },
        wall_pass_slots: 0,
        total_passes: 0,
        load_writes: 0,
        transfer_bytes: transfer,
        means_bytes,
        notes: Vec::new(),
    })
}

/// Baseline shared row: byte A = filter 2g, byte B = filter 2g+1; regular
/// mode leaves physical columns = weight bits.
fn shared_baseline_bindings(g: usize, n: usize) -> Vec<OutputBinding> {
    let mut out = Vec::with_capacity(16);
    for bit in 0..8 {
        out.push(OutputBinding {
            column: bit,
            group: ReduceGroup::All32,
            channel: 2 * g,
            weight_bit: bit,
        });
        if 2 * g + 1 < n {
            out.push(OutputBinding {
                column: 8 + bit,
                group: ReduceGroup::All32,
                channel: 2 * g + 1,
                weight_bit: bit,
            });
        }
    }
    out
}

/// Comp shared row: byte A = pair 2g (channels 4g, 4g+1), byte B = pair
/// 2g+1 (channels 4g+2, 4g+3); double mode interleaves Q/complement columns.
fn shared_fcc_bindings(g: usize, _n: usize) -> Vec<OutputBinding> {
    let mut out = Vec::with_capacity(32);
    for phys in 0..16 {
        let (base_channel, bit) = if phys < 8 {
            (4 * g, phys)
        } else {
            (4 * g + 2, phys - 8)
        };
        out.push(OutputBinding {
            column: 2 * phys,
            group: ReduceGroup::All32,
            channel: base_channel,
            weight_bit: bit,
        });
        out.push(OutputBinding {
            column: 2 * phys + 1,
            group: ReduceGroup::All32,
            channel: base_channel + 1,
            weight_bit: bit,
        });
    }
    out
}

fn dw_guard(spec: &LayerSpec) -> Result<usize> {
    let k2 = spec.k * spec.k;
    if k2 > COMPARTMENTS {
        return Err(Error::ScheduleConfig {
            layer: spec.id.clone(),
            reason: format!(
                "depthwise window of {k2} elements exceeds {COMPARTMENTS} compartments"
            ),
        });
    }
    Ok(k2)
}

/// Baseline depthwise: one channel per row on macro 0, window elements on
/// lanes 0..K^2, byte slot B idle.
fn map_dw_baseline(spec: &LayerSpec, bank: &FilterBank<i8>) -> Result<Schedule> {
    let k2 = dw_guard(spec)?;
    let mut phases = Vec::new();
    let mut channel = 0usize;
    while channel < spec.n {
        let count = (spec.n - channel).min(ROWS_PER_COMPARTMENT);
        let mut phase = Phase::default();
        for local in 0..count {
            let c = channel + local;
            let flat = bank.flatten_filter(c);
            for (i, byte) in flat.iter().enumerate() {
                phase.loads.push(LoadStep {
                    macro_id: 0,
                    compartment: i,
                    row: local,
                    image: RowImage::pack(*byte, 0),
                });
            }
            let mut rows: RowSelect = [None; COMPARTMENTS];
            for slot in rows.iter_mut().take(k2) {
                *slot = Some(local as u8);
            }
            let bindings = (0..8)
                .map(|bit| OutputBinding {
                    column: bit,
                    group: ReduceGroup::All32,
                    channel: c,
                    weight_bit: bit,
                })
                .collect();
            phase.templates.push(PassTemplate {
                macro_id: 0,
                mode: MacroMode::Regular,
                reduce: ReduceMode::Combined,
                rows,
                input: PassInput::Windows(vec![WindowFeed {
                    base: 0,
                    len: k2,
                    inp_channel: c,
                    inn_channel: None,
                }]),
                bindings,
            });
        }
        phases.push(phase);
        channel += count;
    }
    Ok(Schedule {
        layer_id: spec.id.clone(),
        kind: spec.kind,
        mapping: "dw-baseline",
        uses_comp_store: false,
        positions: spec.positions(),
        phases,
        parallelism: Parallelism {
            compartments: k2,
            macros: 1,
            columns: 8,
        },
        wall_pass_slots: 0,
        total_passes: 0,
        load_writes: 0,
        transfer_bytes: (spec.n * k2) as u64,
        means_bytes: 0,
        notes: Vec::new(),
    })
}

/// Depthwise with complementary pairs: quads of two pairs share a row's
/// byte slots and are served by two staged passes. With the reconfigurable
/// (split) adder trees and a window small enough, two quads ride the lane
/// halves concurrently.
fn map_dw_comp(
    spec: &LayerSpec,
    store: &CompFilterStore,
    features: &FeatureConfig,
) -> Result<Schedule> {
    let k2 = dw_guard(spec)?;
    let pairs = store.stored().dim().0;
    let quads = pairs.div_ceil(2);
    let mut notes = Vec::new();
    let split = if features.reconfig_unit {
        if k2 <= COMPARTMENTS / 2 {
            true
        } else {
            notes.push(format!(
                "window of {k2} elements does not fit a 16-lane half; adder trees stay combined"
            ));
            false
        }
    } else {
        false
    };
    let flat: Vec<Vec<i8>> = (0..pairs).map(|p| store.flatten_stored(p)).collect();
    let quad_image = |q: usize, i: usize| -> RowImage {
        let a = flat[2 * q][i];
        let b = flat.get(2 * q + 1).map_or(0, |v| v[i]);
        RowImage::pack(a, b)
    };
    // Stage templates for the quads at lane 0 (lo) and optionally lane 16
    // (hi) sharing row `local`.
    let stage_templates = |local: usize, lo_quad: usize, hi_quad: Option<usize>| {
        let mut templates = Vec::new();
        for stage in [Stage::First, Stage::Second] {
            // Byte slot A carries the quad's even pair, slot B its odd pair.
            let pair_of = |q: usize| match stage {
                Stage::First => Some(2 * q).filter(|p| *p < pairs),
                Stage::Second => Some(2 * q + 1).filter(|p| *p < pairs),
            };
            let lo_pair = pair_of(lo_quad);
            let hi_pair = hi_quad.and_then(pair_of);
            if lo_pair.is_none() && hi_pair.is_none() {
                continue;
            }
            let mut rows: RowSelect = [None; COMPARTMENTS];
            let mut feeds = Vec::new();
            let mut bindings = Vec::new();
            let mut bind = |pair: usize, group: ReduceGroup| {
                for bit in 0..8 {
                    let phys = match stage {
                        Stage::First => bit,
                        Stage::Second => 8 + bit,
                    };
                    bindings.push(OutputBinding {
                        column: 2 * phys,
                        group,
                        channel: 2 * pair,
                        weight_bit: bit,
                    });
                    bindings.push(OutputBinding {
                        column: 2 * phys + 1,
                        group,
                        channel: 2 * pair + 1,
                        weight_bit: bit,
                    });
                }
            };
            if let Some(p) = lo_pair {
                for slot in rows.iter_mut().take(k2) {
                    *slot = Some(local as u8);
                }
                feeds.push(WindowFeed {
                    base: 0,
                    len: k2,
                    inp_channel: 2 * p,
                    inn_channel: Some(2 * p + 1),
                });
                bind(
                    p,
                    if split {
                        ReduceGroup::Lo16
                    } else {
                        ReduceGroup::All32
                    },
                );
            }
            if let Some(p) = hi_pair {
                for slot in rows.iter_mut().skip(16).take(k2) {
                    *slot = Some(local as u8);
                }
                feeds.push(WindowFeed {
                    base: 16,
                    len: k2,
                    inp_channel: 2 * p,
                    inn_channel: Some(2 * p + 1),
                });
                bind(p, ReduceGroup::Hi16);
            }
            templates.push(PassTemplate {
                macro_id: 0,
                mode: MacroMode::Double,
                reduce: if split {
                    ReduceMode::Staged(stage)
                } else {
                    ReduceMode::Combined
                },
                rows,
                input: PassInput::Windows(feeds),
                bindings,
            });
        }
        templates
    };
    let mut phases = Vec::new();
    if split {
        // Two quads per row: quad 2j on lanes 0..k2, quad 2j+1 on 16..16+k2.
        let rows_total = quads.div_ceil(2);
        let mut row = 0usize;
        while row < rows_total {
            let count = (rows_total - row).min(ROWS_PER_COMPARTMENT);
            let mut phase = Phase::default();
            for local in 0..count {
                let j = row + local;
                let (lo_quad, hi_quad) = (2 * j, Some(2 * j + 1).filter(|q| *q < quads));
                for i in 0..k2 {
                    phase.loads.push(LoadStep {
                        macro_id: 0,
                        compartment: i,
                        row: local,
                        image: quad_image(lo_quad, i),
                    });
                }
                if let Some(hq) = hi_quad {
                    for i in 0..k2 {
                        phase.loads.push(LoadStep {
                            macro_id: 0,
                            compartment: 16 + i,
                            row: local,
                            image: quad_image(hq, i),
                        });
                    }
                }
                phase
                    .templates
                    .extend(stage_templates(local, lo_quad, hi_quad));
            }
            phases.push(phase);
            row += count;
        }
    } else {
        let mut quad = 0usize;
        while quad < quads {
            let count = (quads - quad).min(ROWS_PER_COMPARTMENT);
            let mut phase = Phase::default();
            for local in 0..count {
                let q = quad + local;
                for i in 0..k2 {
                    phase.loads.push(LoadStep {
                        macro_id: 0,
                        compartment: i,
                        row: local,
                        image: quad_image(q, i),
                    });
                }
                phase.templates.extend(stage_templates(local, q, None));
            }
            phases.push(phase);
            quad += count;
        }
    }
    Ok(Schedule {
        layer_id: spec.id.clone(),
        kind: spec.kind,
        mapping: if split { "dw-split" } else { "dw-dbis" },
        uses_comp_store: true,
        positions: spec.positions(),
        phases,
        parallelism: Parallelism {
            compartments: if split { 2 * k2 } else { k2 },
            macros: 1,
            columns: 16,
        },
        wall_pass_slots: 0,
        total_passes: 0,
        load_writes: 0,
        transfer_bytes: (pairs * k2) as u64 + 2 * pairs as u64,
        means_bytes: 2 * pairs as u64,
        notes,
    })
}
