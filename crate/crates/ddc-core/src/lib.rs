//! Bit-exact simulator for an SRAM digital compute-in-memory accelerator
//! with complementary weight storage.
//!
//! The crate models the full stack:
//!
//! - **Weight transformation** ([`fcc`]): pairs filters, symmetrizes each
//!   pair about its mean, quantizes to int8, and stores only every other
//!   filter — the missing twin is recovered in-array by bitwise complement.
//! - **Macro model** ([`pim`]): compartments, rows, and columns of a
//!   compute-in-memory macro at bit granularity, with regular and
//!   double-throughput compute modes and configurable adder-tree reduction.
//! - **Datapath** ([`datapath`]): bit-serial input streaming, count grids,
//!   shift-add accumulation, and the add-reduce recovery step.
//! - **Mapping and execution** ([`mapper`], [`exec`]): layer-to-macro
//!   scheduling for standard, pointwise, depthwise, and fully-connected
//!   layers, plus a cycle-faithful executor replaying schedules on the
//!   macro models.
//! - **Timing** ([`timing`], [`sim`]): load/compute cycle accounting,
//!   per-network reports, and chained whole-network simulation.
//! - **Reference** ([`oracle`], [`validate`]): independent convolution
//!   oracles and randomized differential validation with failing-case
//!   minimization.
//! - **Interchange** ([`ddct`], [`netspec`], [`nets`]): tensor container
//!   files, TOML network descriptions, and built-in CIFAR-10 networks.
//!
//! Floating-point stages are generic over the scalar type through
//! [`scalar::Real`]; the aliases below fix the two supported instantiations.

pub mod bank;
pub mod config;
pub mod datapath;
pub mod ddct;
pub mod error;
pub mod exec;
pub mod fcc;
pub mod fixtures;
pub mod layer;
pub mod mapper;
pub mod nets;
pub mod netspec;
pub mod oracle;
pub mod pim;
pub mod scalar;
pub mod sim;
pub mod timing;
pub mod validate;

pub use bank::{ActivationTensor, CompFilterStore, FilterBank, OutputTensor, PairMeans};
pub use config::{ConfigPreset, FeatureConfig};
pub use error::{Error, Result};
pub use exec::{execute, ExecResult};
pub use fcc::{transform_bank, TransformOutcome};
pub use layer::{LayerKind, LayerSpec};
pub use mapper::{map_layer, LayerWeights, Schedule};
pub use netspec::{NetLayer, NetworkSpec};
pub use sim::{run_network, run_network_with, LayerRun, NetworkRun};
pub use timing::{all_preset_reports, network_report, speedup, CycleConstants, NetworkReport};
pub use validate::{validate_layer, validate_layer_against, LayerValidation};

/// Single-precision filter bank, the common working type.
pub type FloatBank = FilterBank<f32>;
/// Double-precision filter bank for high-precision reference runs.
pub type DoubleBank = FilterBank<f64>;
/// Quantized int8 filter bank.
pub type IntBank = FilterBank<i8>;
/// Pair means over a single-precision bank.
pub type FloatMeans = PairMeans<f32>;
/// Pair means over a double-precision bank.
pub type DoubleMeans = PairMeans<f64>;
/// Integer pair means, as used by the hardware recovery step.
pub type IntMeans = PairMeans<i16>;
/// Transformation artifacts at single precision.
pub type FloatOutcome = TransformOutcome<f32>;
/// Transformation artifacts at double precision.
pub type DoubleOutcome = TransformOutcome<f64>;
