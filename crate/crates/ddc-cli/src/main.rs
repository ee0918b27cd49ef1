//! `ddcsim`: command-line driver for the double-capacity PIM simulator.
//!
//! Five subcommands cover the pipeline end to end: `transform` quantizes
//! weight banks and derives complementary pair stores, `map` prints the
//! hardware schedule for every layer, `simulate` executes a network on the
//! simulated machine, `validate` differentially tests the machine against
//! the reference convolution, and `report` prices a network across all
//! feature presets.
//!
//! Exit codes are a stable contract: 0 success, 1 validation failure,
//! 2 input error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Ix3, Ix4};

use ddc_core::ddct::{self, Tensor};
use ddc_core::mapper::effective_fcc;
use ddc_core::timing::{self, layer_seed, synth_layer_bank, synth_layer_weights, CycleConstants};
use ddc_core::{
    fcc, run_network_with, transform_bank, ActivationTensor, CompFilterStore, ConfigPreset,
    FilterBank, LayerSpec, LayerWeights, NetworkSpec, PairMeans, TransformOutcome,
};

#[derive(Parser)]
#[command(
    name = "ddcsim",
    version,
    about = "Simulator and weight toolchain for a double-capacity SRAM PIM accelerator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize weight banks and derive complementary pair stores.
    Transform(TransformArgs),
    /// Print the hardware schedule for every layer of a network.
    Map(MapArgs),
    /// Execute a network on the simulated machine.
    Simulate(SimulateArgs),
    /// Differentially test the machine against the reference convolution.
    Validate(ValidateArgs),
    /// Cycle and transfer accounting across all feature presets.
    Report(ReportArgs),
}

#[derive(Args)]
struct TransformArgs {
    /// Network description; every layer bank is synthesized and transformed.
    #[arg(long, conflicts_with = "weights", required_unless_present = "weights")]
    net: Option<PathBuf>,
    /// Single weight tensor (float32 or int8 DDCT, dims [N, C, Kh, Kw]).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Directory for emitted artifacts; without it only the report prints.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the stage-by-stage trace of pair 0, element (0, 0, 0).
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct MapArgs {
    /// Network description file.
    #[arg(long)]
    net: PathBuf,
    /// Feature preset: baseline, fcc, fcc+dbis, or full.
    #[arg(long, default_value = "full")]
    config: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network description file.
    #[arg(long)]
    net: PathBuf,
    /// Feature preset: baseline, fcc, fcc+dbis, or full.
    #[arg(long, default_value = "full")]
    config: String,
    /// Seed for the synthesized input activation.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Input activation (int8 DDCT, dims [C, H, W]); overrides --seed.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Load weights from transform artifacts instead of synthesizing them.
    #[arg(long)]
    weights_dir: Option<PathBuf>,
    /// Write output.ddct and cycles.csv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print per-pass machine traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Network description file.
    #[arg(long)]
    net: PathBuf,
    /// Feature preset: baseline, fcc, fcc+dbis, or full.
    #[arg(long, default_value = "full")]
    config: String,
    /// Randomized inputs per layer.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Base seed for trial inputs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Load weights from transform artifacts instead of synthesizing them.
    #[arg(long)]
    weights_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Network description file.
    #[arg(long)]
    net: PathBuf,
    /// Write report.csv and report.txt here instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Transform(args) => cmd_transform(args),
        Command::Map(args) => cmd_map(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Report(args) => cmd_report(args),
    }
}

// ---------------------------------------------------------------- transform

fn cmd_transform(args: TransformArgs) -> Result<ExitCode> {
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut report = String::new();
    if let Some(path) = &args.weights {
        let id = bank_id_from_path(path);
        let bank = load_float_bank(path, &id)?;
        transform_one(&bank, args.out_dir.as_deref(), args.trace, &mut report)?;
    } else {
        let net_path = args.net.as_ref().expect("clap enforces --net or --weights");
        let net = load_net(net_path)?;
        let _ = writeln!(report, "transform report for network {}", net.name);
        for (idx, layer) in net.layers.iter().enumerate() {
            let spec = layer.to_spec();
            let bank = synth_layer_bank(&spec, layer_seed(idx));
            transform_one(&bank, args.out_dir.as_deref(), args.trace, &mut report)?;
        }
    }
    print!("{report}");
    if let Some(dir) = &args.out_dir {
        let path = dir.join("report.txt");
        fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Quantize one bank, derive its pair store when complementary storage is
/// enabled, emit artifacts, and append a report line.
fn transform_one(
    bank: &FilterBank<f32>,
    out_dir: Option<&Path>,
    trace: bool,
    report: &mut String,
) -> Result<()> {
    let id = bank.layer_id().to_string();
    let quant = fcc::quantize(bank);
    if let Some(dir) = out_dir {
        write_ddct(
            &dir.join(format!("{id}.int8.ddct")),
            &Tensor::I8(quant.bank.weights().clone().into_dyn()),
        )?;
    }
    if !bank.fcc_enabled() {
        let (n, ..) = bank.dims();
        let _ = writeln!(
            report,
            "layer {id}: filters {n} scale {:.6} quantized only (complementary storage disabled)",
            quant.scale
        );
        return Ok(());
    }
    let outcome = transform_bank(bank).with_context(|| format!("transforming bank {id}"))?;
    if trace {
        print!("{}", trace_pair_zero(bank, &outcome));
    }
    if let Some(dir) = out_dir {
        write_ddct(
            &dir.join(format!("{id}.comp.ddct")),
            &Tensor::I8(outcome.store.stored().clone().into_dyn()),
        )?;
        write_ddct(
            &dir.join(format!("{id}.means.ddct")),
            &Tensor::I16(Array1::from_vec(outcome.store.means().values().to_vec()).into_dyn()),
        )?;
        write_ddct(
            &dir.join(format!("{id}.biased.ddct")),
            &Tensor::I8(outcome.biased.bank.weights().clone().into_dyn()),
        )?;
    }
    let (n, ..) = bank.dims();
    let _ = writeln!(
        report,
        "layer {id}: filters {n} pairs {} scale {:.6} flagged {} {} distortion {}",
        outcome.store.means().len(),
        outcome.scale,
        outcome.flagged.len(),
        verify_status(&outcome),
        if outcome.distortion.is_uniform_minus_one() {
            "uniform"
        } else {
            "IRREGULAR"
        },
    );
    Ok(())
}

/// Summarize the store round-trip check. Saturation-flagged pairs are
/// allowed to deviate (their mirrored twin was clamped); a deviation in an
/// unflagged pair is a real integrity failure.
fn verify_status(outcome: &TransformOutcome<f32>) -> String {
    if outcome.verify.pass() {
        return "complementarity clean".to_string();
    }
    let flagged: std::collections::BTreeSet<usize> =
        outcome.flagged.iter().map(|f| f.pair).collect();
    let all_expected = !flagged.is_empty()
        && outcome
            .verify
            .failures
            .iter()
            .all(|f| flagged.contains(&f.pair));
    if all_expected {
        format!(
            "complementarity pass outside flagged ({} saturation deviations)",
            outcome.verify.total_failures
        )
    } else {
        format!("complementarity FAIL({})", outcome.verify.total_failures)
    }
}

/// Stage-by-stage walk of the first element pair, printed under --trace.
fn trace_pair_zero(bank: &FilterBank<f32>, outcome: &TransformOutcome<f32>) -> String {
    let el = [0usize, 0, 0, 0];
    let odd = [1usize, 0, 0, 0];
    let stored = outcome.store.stored()[el];
    let implicit = !stored;
    let m = i32::from(outcome.int_means.get(0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "transform trace for layer {}, pair 0, element (0, 0, 0):",
        bank.layer_id()
    );
    let _ = writeln!(
        s,
        "  float pair          = ({:?}, {:?})",
        bank.weights()[el],
        bank.weights()[odd]
    );
    let _ = writeln!(
        s,
        "  float mean M        = {:?}",
        outcome.float_means.get(0)
    );
    let _ = writeln!(
        s,
        "  symmetric pair      = ({:?}, {:?})",
        outcome.float_symmetric.weights()[el],
        outcome.float_symmetric.weights()[odd]
    );
    let _ = writeln!(s, "  quantization scale  = {:.6}", outcome.scale);
    let _ = writeln!(s, "  integer mean M      = {m}");
    let _ = writeln!(
        s,
        "  quantized pair      = ({}, {})",
        outcome.int_symmetric.weights()[el],
        outcome.int_symmetric.weights()[odd]
    );
    let _ = writeln!(
        s,
        "  biased-comp pair    = ({}, {})",
        outcome.biased.bank.weights()[el],
        outcome.biased.bank.weights()[odd]
    );
    let _ = writeln!(
        s,
        "  stored byte         = {:08b} (0x{:02X})",
        stored as u8, stored as u8
    );
    let _ = writeln!(
        s,
        "  implicit complement = {:08b} (0x{:02X})",
        implicit as u8, implicit as u8
    );
    s
}

// ---------------------------------------------------------------------- map

fn cmd_map(args: MapArgs) -> Result<ExitCode> {
    let net = load_net(&args.net)?;
    let preset = ConfigPreset::from_name(&args.config)?;
    let features = preset.features();
    println!("network {} config {}", net.name, preset.name());
    for (idx, layer) in net.layers.iter().enumerate() {
        let spec = layer.to_spec();
        let fcc_on = effective_fcc(&spec, &features);
        let weights = synth_layer_weights(&spec, fcc_on, layer_seed(idx))?;
        let schedule = ddc_core::map_layer(&spec, &weights, &features)?;
        print!("{}", schedule.summary());
    }
    Ok(ExitCode::SUCCESS)
}

// ----------------------------------------------------------------- simulate

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let net = load_net(&args.net)?;
    let preset = ConfigPreset::from_name(&args.config)?;
    let constants = CycleConstants::default();
    let input = match &args.input {
        Some(path) => Some(load_activation(path)?),
        None => None,
    };
    let run = match &args.weights_dir {
        Some(dir) => run_network_with(
            &net,
            preset,
            &constants,
            args.seed,
            false,
            args.trace,
            input,
            |spec, fcc_on, _seed| weights_from_dir(dir, spec, fcc_on),
        )?,
        None => run_network_with(
            &net,
            preset,
            &constants,
            args.seed,
            false,
            args.trace,
            input,
            synth_layer_weights,
        )?,
    };

    println!(
        "network {} config {} seed {}",
        run.name,
        preset.name(),
        run.seed
    );
    for layer in &run.layers {
        println!(
            "layer {:<14} mapping {:<15} passes {:>8} checksum {:016x}",
            layer.layer_id, layer.mapping, layer.passes, layer.output_checksum
        );
        for line in &layer.trace {
            println!("    {line}");
        }
    }
    let baseline = timing::network_report(&net, ConfigPreset::Baseline, &constants)?;
    println!(
        "total cycles {} (load {} compute {})  transfer {} B  speedup vs baseline {:.3}",
        run.report.total_cycles(),
        run.report.total_load(),
        run.report.total_compute(),
        run.report.total_transfer(),
        timing::speedup(&baseline, &run.report),
    );

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_ddct(
            &dir.join("output.ddct"),
            &Tensor::I32(run.final_output.data().clone().into_dyn()),
        )?;
        let reports = timing::all_preset_reports(&net, &constants)?;
        let csv = timing::csv_report(&reports);
        let path = dir.join("cycles.csv");
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

// ----------------------------------------------------------------- validate

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let net = load_net(&args.net)?;
    let preset = ConfigPreset::from_name(&args.config)?;
    let features = preset.features();
    if args.trials == 0 {
        println!(
            "warning: trials = 0, nothing exercised; vacuous pass for network {}",
            net.name
        );
        return Ok(ExitCode::SUCCESS);
    }
    let mut failures = 0usize;
    for (idx, layer) in net.layers.iter().enumerate() {
        let spec = layer.to_spec();
        let fcc_on = effective_fcc(&spec, &features);
        // The oracle always runs the network's true (synthesized) weights;
        // with --weights-dir the machine runs the artifacts instead, so a
        // corrupted file shows up as a mismatch rather than agreeing with
        // itself on both sides.
        let reference = synth_layer_weights(&spec, fcc_on, layer_seed(idx))?;
        let machine = match &args.weights_dir {
            Some(dir) => weights_from_dir(dir, &spec, fcc_on)?,
            None => synth_layer_weights(&spec, fcc_on, layer_seed(idx))?,
        };
        let outcome = ddc_core::validate_layer_against(
            &spec,
            &machine,
            &reference,
            &features,
            args.trials,
            args.seed ^ layer_seed(idx),
        )?;
        println!("{}", outcome.describe());
        if !outcome.passed() {
            failures += 1;
        }
    }
    if failures > 0 {
        println!(
            "validation FAILED: {failures} of {} layers disagreed with the reference",
            net.layers.len()
        );
        return Ok(ExitCode::from(1));
    }
    println!(
        "validation passed: {} layers x {} trials bit-exact under config {}",
        net.layers.len(),
        args.trials,
        preset.name()
    );
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------------- report

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let net = load_net(&args.net)?;
    let constants = CycleConstants::default();
    let reports = timing::all_preset_reports(&net, &constants)?;
    let text = timing::text_report(&reports);
    print!("{text}");
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv_path = dir.join("report.csv");
        fs::write(&csv_path, timing::csv_report(&reports))
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let txt_path = dir.join("report.txt");
        fs::write(&txt_path, &text).with_context(|| format!("writing {}", txt_path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------------ helpers

fn load_net(path: &Path) -> Result<NetworkSpec> {
    NetworkSpec::load(path).with_context(|| format!("loading netspec {}", path.display()))
}

/// The file stem up to the first dot names the layer: `conv1.int8.ddct`
/// and `conv1.f32.ddct` both describe layer `conv1`.
fn bank_id_from_path(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bank".to_string());
    name.split('.').next().unwrap_or("bank").to_string()
}

fn load_float_bank(path: &Path, id: &str) -> Result<FilterBank<f32>> {
    let tensor = ddct::read_tensor(path)?;
    let arr = match tensor {
        Tensor::F32(a) => a,
        Tensor::I8(a) => a.mapv(f32::from),
        other => bail!(
            "{}: transform expects float32 or int8 weights, found {:?}",
            path.display(),
            other.dtype()
        ),
    };
    let arr = arr.into_dimensionality::<Ix4>().map_err(|_| {
        anyhow::anyhow!("{}: weight tensors are 4-D [N, C, Kh, Kw]", path.display())
    })?;
    Ok(FilterBank::new(arr, id, true))
}

fn load_activation(path: &Path) -> Result<ActivationTensor> {
    let tensor = ddct::read_tensor(path)?;
    let Tensor::I8(arr) = tensor else {
        bail!(
            "{}: input activations must be int8, found {:?}",
            path.display(),
            tensor.dtype()
        );
    };
    let arr = arr
        .into_dimensionality::<Ix3>()
        .map_err(|_| anyhow::anyhow!("{}: activations are 3-D [C, H, W]", path.display()))?;
    Ok(ActivationTensor::new(arr))
}

fn write_ddct(path: &Path, tensor: &Tensor) -> Result<()> {
    ddct::write_tensor(path, tensor).with_context(|| format!("writing {}", path.display()))
}

/// Rebuild a layer's weights from transform artifacts.
///
/// The quantization scale is not persisted in the integer artifacts; the
/// simulation is integer-exact and never consumes it, so loaded stores
/// carry a nominal scale of 1.
fn weights_from_dir(dir: &Path, spec: &LayerSpec, fcc_on: bool) -> ddc_core::Result<LayerWeights> {
    if fcc_on {
        let stored = read_i8_4d(&dir.join(format!("{}.comp.ddct", spec.id)))?;
        let means = read_i16_1d(&dir.join(format!("{}.means.ddct", spec.id)))?;
        let store = CompFilterStore::new(stored, PairMeans::new(means, &spec.id), 1.0, &spec.id)?;
        Ok(LayerWeights::Comp(store))
    } else {
        let bank = read_i8_4d(&dir.join(format!("{}.int8.ddct", spec.id)))?;
        Ok(LayerWeights::Plain(FilterBank::new(
            bank,
            &spec.id,
            spec.fcc_enabled,
        )))
    }
}

fn read_i8_4d(path: &Path) -> ddc_core::Result<ndarray::Array4<i8>> {
    let tensor = ddct::read_tensor(path)?;
    let Tensor::I8(arr) = tensor else {
        return Err(format_error(path, "expected an int8 tensor"));
    };
    arr.into_dimensionality::<Ix4>()
        .map_err(|_| format_error(path, "expected a 4-D [N, C, Kh, Kw] tensor"))
}

fn read_i16_1d(path: &Path) -> ddc_core::Result<Vec<i16>> {
    let tensor = ddct::read_tensor(path)?;
    let Tensor::I16(arr) = tensor else {
        return Err(format_error(path, "expected an int16 tensor"));
    };
    let arr = arr
        .into_dimensionality::<ndarray::Ix1>()
        .map_err(|_| format_error(path, "expected a 1-D means vector"))?;
    Ok(arr.to_vec())
}

fn format_error(path: &Path, reason: &str) -> ddc_core::Error {
    ddc_core::Error::DdctFormat {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}
