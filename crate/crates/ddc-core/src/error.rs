//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Error`]. Variants carry
//! enough coordinates (layer id, pair index, element position) that a failure
//! in a deep pipeline stage can be traced back to its source tensor element.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A filter bank slated for complementary transformation has an odd
    /// number of output channels and cannot be split into twin pairs.
    #[error("layer {layer}: filter count {n} is odd; complementary pairing requires an even channel count")]
    OddFilterCount { layer: String, n: usize },

    /// Two artifacts that must describe the same bank disagree on shape.
    #[error("{context}: dimension mismatch, expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// A weight of -128 reached the complementization stage. The quantizer
    /// reserves -128 precisely so that the subtract-one step cannot wrap.
    #[error(
        "layer {layer}: weight -128 at pair {pair}, element ({c},{kh},{kw}) cannot be complemented"
    )]
    WeightUnderflow {
        layer: String,
        pair: usize,
        c: usize,
        kh: usize,
        kw: usize,
    },

    /// Complementization was asked to run on a bank that is not integer
    /// symmetric about its pair means.
    #[error(
        "layer {layer}: pair {pair} is not symmetric about its mean at element ({c},{kh},{kw})"
    )]
    NotSymmetric {
        layer: String,
        pair: usize,
        c: usize,
        kh: usize,
        kw: usize,
    },

    /// Decomposition discovered a stored/implicit pair whose bit patterns are
    /// not complementary.
    #[error(
        "layer {layer}: complement integrity violated at pair {pair}, element ({c},{kh},{kw})"
    )]
    ComplementIntegrity {
        layer: String,
        pair: usize,
        c: usize,
        kh: usize,
        kw: usize,
    },

    /// A macro operation was attempted in the wrong mode, e.g. a row write
    /// while the array is configured for computation.
    #[error("macro mode violation: {operation} requires {required} mode but the array is in {actual} mode")]
    ModeViolation {
        operation: String,
        required: String,
        actual: String,
    },

    /// A compartment or row index outside the physical array geometry.
    #[error("macro index out of range: {what} {got} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// Layer geometry that the hardware model cannot map.
    #[error("layer {layer}: {reason}")]
    InvalidGeometry { layer: String, reason: String },

    /// The dot-product length guard: 32-bit accumulators are exact only while
    /// K*K*C stays within 2^16 elements.
    #[error("layer {layer}: vector length {len} exceeds the 2^16 accumulator guard")]
    AccumulatorGuard { layer: String, len: usize },

    /// Malformed tensor container file.
    #[error("ddct {path}: {reason}")]
    DdctFormat { path: String, reason: String },

    /// Malformed or inconsistent network description.
    #[error("netspec: {0}")]
    Netspec(String),

    /// A schedule was paired with a feature configuration that cannot
    /// execute it (e.g. double-mode passes on a baseline machine).
    #[error("schedule for layer {layer} is inconsistent with config: {reason}")]
    ScheduleConfig { layer: String, reason: String },

    /// Weight memory model: a single tile exceeds what the memory can stage.
    #[error("prefetch: chunk of {bytes} bytes for layer {layer} exceeds weight memory capacity")]
    PrefetchOverflow { layer: String, bytes: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
