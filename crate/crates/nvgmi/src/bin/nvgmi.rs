//! Experiment runner for the hybrid NV-GMI magnetometer simulator.

use clap::{Parser, Subcommand};
use nvgmi::config::{parse_config, ExperimentKind};
use nvgmi::error::Error;
use nvgmi::experiment::{run_experiment, OutputFormat};
use nvgmi::presets;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nvgmi",
    version,
    about = "Simulate and analyze hybrid NV / giant-magnetoimpedance DC magnetometry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// Experiment configuration (TOML with explicit units).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for traces, reports, and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweep evaluation (0 = rayon default). Results are
    /// byte-identical for every thread count.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Format of auxiliary data files (traces are always CSV).
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// ODMR frequency sweep with a Lorentzian multi-dip fit.
    Odmr(RunArgs),
    /// Rabi oscillation vs MW pulse duration.
    Rabi(RunArgs),
    /// Ramsey dephasing with hyperfine beating and FFT.
    Ramsey(RunArgs),
    /// Hahn-echo coherence decay (both readout phases).
    Hahn(RunArgs),
    /// Synchronized echo magnetometry vs external DC field.
    Magnetometry(RunArgs),
    /// Contrast / fringe trade-off across echo periods.
    SweepFac(RunArgs),
    /// Field-referred noise spectral density (sensitive + background).
    NoiseFloor(RunArgs),
    /// Coil calibration from per-current ODMR spectra.
    Calibrate(RunArgs),
    /// Wide-field map: forward splittings and least-squares reconstruction.
    Widefield(RunArgs),
    /// GMI ratio / impedance surface over frequency and DC field.
    GmiCurve(RunArgs),
    /// Print the built-in parameter presets as JSON.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let (kind, args) = match cli.command {
        Command::Presets => {
            let text = serde_json::to_string_pretty(&presets::catalog())
                .map_err(|e| Error::invalid(e.to_string()))?;
            println!("{text}");
            return Ok(());
        }
        Command::Odmr(a) => (ExperimentKind::Odmr, a),
        Command::Rabi(a) => (ExperimentKind::Rabi, a),
        Command::Ramsey(a) => (ExperimentKind::Ramsey, a),
        Command::Hahn(a) => (ExperimentKind::Hahn, a),
        Command::Magnetometry(a) => (ExperimentKind::Magnetometry, a),
        Command::SweepFac(a) => (ExperimentKind::SweepFac, a),
        Command::NoiseFloor(a) => (ExperimentKind::NoiseFloor, a),
        Command::Calibrate(a) => (ExperimentKind::Calibrate, a),
        Command::Widefield(a) => (ExperimentKind::Widefield, a),
        Command::GmiCurve(a) => (ExperimentKind::GmiCurve, a),
    };

    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }

    let config_text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            Error::config(
                path.display().to_string(),
                format!("cannot read config: {e}"),
            )
        })?,
        None => String::new(),
    };
    let config = parse_config(&config_text, Some(kind), args.seed)?;
    let format = match args.format.as_str() {
        "json" => OutputFormat::Json,
        _ => OutputFormat::Csv,
    };

    let manifest = run_experiment(&config, &config_text, &args.out, format)?;
    println!(
        "{}: wrote {} file(s) to {}",
        manifest.experiment,
        manifest.files.len() + 1,
        args.out.display()
    );
    for f in &manifest.files {
        println!("  {}  {}", &f.sha256[..12], f.name);
    }
    Ok(())
}
