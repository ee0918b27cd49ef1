//! Bit-level model of one SRAM compute macro.
//!
//! A macro holds 32 compartments of 64 rows by 16 columns of single-bit
//! cells. Writes happen in normal mode. In compute modes every compartment
//! activates at most one row and each column's cells AND against that
//! compartment's input bit; double mode additionally taps the inverted cell
//! value against a second input, so 16 physical columns produce 32 logical
//! AND results and the stored complement of a filter never occupies space.

use crate::error::{Error, Result};

/// Compartments per macro (one active row each during compute).
pub const COMPARTMENTS: usize = 32;
/// Rows per compartment.
pub const ROWS_PER_COMPARTMENT: usize = 64;
/// Bit columns per row.
pub const COLUMNS: usize = 16;

/// Physically stored capacity in kilobits.
pub const STORED_KBIT: usize = COMPARTMENTS * ROWS_PER_COMPARTMENT * COLUMNS / 1024;
/// Capacity addressable in double mode, where each cell also serves its
/// complement.
pub const LOGICAL_KBIT: usize = 2 * STORED_KBIT;

/// Logical-to-stored capacity ratio delivered by complement reuse.
pub fn capacity_ratio() -> f64 {
    LOGICAL_KBIT as f64 / STORED_KBIT as f64
}

/// Operating mode of the macro.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacroMode {
    /// Plain SRAM access; the only mode that accepts writes.
    Normal,
    /// Bitline compute, one AND result per physical column.
    Regular,
    /// Bitline compute with both cell polarities tapped: column `k` yields
    /// `Q & inp` on logical column `2k` and `!Q & inn` on `2k+1`.
    Double,
}

/// One 16-column row: weight byte A in bits 0-7 (LSB first), byte B in 8-15.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowImage(pub u16);

impl RowImage {
    pub fn pack(a: i8, b: i8) -> Self {
        RowImage(u16::from(a as u8) | (u16::from(b as u8) << 8))
    }

    pub fn byte_a(self) -> i8 {
        (self.0 & 0xFF) as u8 as i8
    }

    pub fn byte_b(self) -> i8 {
        (self.0 >> 8) as u8 as i8
    }

    /// Cell value in physical column `col` (0-15).
    pub fn bit(self, col: usize) -> bool {
        (self.0 >> col) & 1 == 1
    }
}

/// Per-compartment active-row selection for one compute pass; `None` leaves
/// the compartment's wordlines low so it contributes nothing.
pub type RowSelect = [Option<u8>; COMPARTMENTS];

/// Column vectors out of a compute pass: bit `i` of entry `k` is the AND
/// result of compartment `i` on logical column `k`.
pub type ColumnVectors = Vec<u32>;

#[derive(Clone)]
pub struct MacroState {
    mode: MacroMode,
    rows: Vec<[u16; ROWS_PER_COMPARTMENT]>,
}

impl Default for MacroState {
    fn default() -> Self {
        Self::new()
    }
}

impl MacroState {
    pub fn new() -> Self {
        MacroState {
            mode: MacroMode::Normal,
            rows: vec![[0u16; ROWS_PER_COMPARTMENT]; COMPARTMENTS],
        }
    }

    pub fn mode(&self) -> MacroMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: MacroMode) {
        self.mode = mode;
    }

    fn check_slot(&self, compartment: usize, row: usize) -> Result<()> {
        if compartment >= COMPARTMENTS {
            return Err(Error::IndexOutOfRange {
                what: "compartment",
                got: compartment,
                limit: COMPARTMENTS,
            });
        }
        if row >= ROWS_PER_COMPARTMENT {
            return Err(Error::IndexOutOfRange {
                what: "row",
                got: row,
                limit: ROWS_PER_COMPARTMENT,
            });
        }
        Ok(())
    }

    pub fn write_row(&mut self, compartment: usize, row: usize, image: RowImage) -> Result<()> {
        if self.mode != MacroMode::Normal {
            return Err(Error::ModeViolation {
                operation: "write_row".into(),
                required: "normal".into(),
                actual: format!("{:?}", self.mode).to_lowercase(),
            });
        }
        self.check_slot(compartment, row)?;
        self.rows[compartment][row] = image.0;
        Ok(())
    }

    pub fn read_row(&self, compartment: usize, row: usize) -> Result<RowImage> {
        self.check_slot(compartment, row)?;
        Ok(RowImage(self.rows[compartment][row]))
    }

    /// Raw cell contents, compartment-major, for snapshotting.
    pub fn dump(&self) -> Vec<u16> {
        self.rows.iter().flat_map(|c| c.iter().copied()).collect()
    }

    pub fn restore(&mut self, cells: &[u16]) -> Result<()> {
        if cells.len() != COMPARTMENTS * ROWS_PER_COMPARTMENT {
            return Err(Error::DimensionMismatch {
                context: "macro restore".into(),
                expected: format!("{} cells", COMPARTMENTS * ROWS_PER_COMPARTMENT),
                got: format!("{}", cells.len()),
            });
        }
        for (i, chunk) in cells.chunks_exact(ROWS_PER_COMPARTMENT).enumerate() {
            self.rows[i].copy_from_slice(chunk);
        }
        Ok(())
    }

    /// Column vector of stored bits for physical column `col` under the
    /// given row selection, plus the live-compartment mask.
    fn column_q(&self, rows: &RowSelect, col: usize) -> (u32, u32) {
        let mut q = 0u32;
        let mut live = 0u32;
        for (i, sel) in rows.iter().enumerate() {
            if let Some(r) = sel {
                live |= 1 << i;
                if (self.rows[i][usize::from(*r)] >> col) & 1 == 1 {
                    q |= 1 << i;
                }
            }
        }
        (q, live)
    }

    fn check_rows(&self, rows: &RowSelect) -> Result<()> {
        for sel in rows.iter().flatten() {
            if usize::from(*sel) >= ROWS_PER_COMPARTMENT {
                return Err(Error::IndexOutOfRange {
                    what: "active row",
                    got: usize::from(*sel),
                    limit: ROWS_PER_COMPARTMENT,
                });
            }
        }
        Ok(())
    }

    /// Regular-mode pass: 16 column vectors of `Q & inp`, where bit `i` of
    /// `inp` is the serial input bit presented to compartment `i`.
    pub fn compute_regular(&self, rows: &RowSelect, inp: u32) -> Result<ColumnVectors> {
        if self.mode != MacroMode::Regular {
            return Err(Error::ModeViolation {
                operation: "compute_regular".into(),
                required: "regular".into(),
                actual: format!("{:?}", self.mode).to_lowercase(),
            });
        }
        self.check_rows(rows)?;
        let mut out = Vec::with_capacity(COLUMNS);
        for col in 0..COLUMNS {
            let (q, live) = self.column_q(rows, col);
            out.push(q & inp & live);
        }
        Ok(out)
    }

    /// Double-mode pass: 32 column vectors; logical column `2k` carries
    /// `Q_k & inp` and `2k+1` carries `!Q_k & inn`. Idle compartments stay
    /// zero on both polarities.
    pub fn compute_double(&self, rows: &RowSelect, inp: u32, inn: u32) -> Result<ColumnVectors> {
        if self.mode != MacroMode::Double {
            return Err(Error::ModeViolation {
                operation: "compute_double".into(),
                required: "double".into(),
                actual: format!("{:?}", self.mode).to_lowercase(),
            });
        }
        self.check_rows(rows)?;
        let mut out = Vec::with_capacity(2 * COLUMNS);
        for col in 0..COLUMNS {
            let (q, live) = self.column_q(rows, col);
            out.push(q & inp & live);
            out.push(!q & inn & live);
        }
        Ok(out)
    }
}

/// How the adder tree digests one pass's column vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceMode {
    /// One 32-input tree per column.
    Combined,
    /// Two 16-input trees per column: compartments 0-15 and 16-31.
    Split,
    /// Split trees time-shared across byte slots: only columns backed by
    /// the named slot are counted this stage, the rest read zero.
    Staged(Stage),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Byte-slot A: physical columns 0-7.
    First,
    /// Byte-slot B: physical columns 8-15.
    Second,
}

/// Per-column popcounts out of the adder tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReduceCounts {
    Combined(Vec<u32>),
    /// `(lo, hi)` = counts over compartments 0-15 and 16-31.
    Split(Vec<(u32, u32)>),
}

/// Whether a logical column index belongs to the stage's byte slot. Double
/// mode fans each physical column into two logical ones, so the slot
/// boundary sits at half the vector length either way.
fn stage_live(stage: Stage, col: usize, total: usize) -> bool {
    match stage {
        Stage::First => col < total / 2,
        Stage::Second => col >= total / 2,
    }
}

pub fn adder_reduce(columns: &ColumnVectors, mode: ReduceMode) -> ReduceCounts {
    match mode {
        ReduceMode::Combined => {
            ReduceCounts::Combined(columns.iter().map(|v| v.count_ones()).collect())
        }
        ReduceMode::Split => ReduceCounts::Split(
            columns
                .iter()
                .map(|v| ((v & 0xFFFF).count_ones(), (v >> 16).count_ones()))
                .collect(),
        ),
        ReduceMode::Staged(stage) => ReduceCounts::Split(
            columns
                .iter()
                .enumerate()
                .map(|(col, v)| {
                    if stage_live(stage, col, columns.len()) {
                        ((v & 0xFFFF).count_ones(), (v >> 16).count_ones())
                    } else {
                        (0, 0)
                    }
                })
                .collect(),
        ),
    }
}
