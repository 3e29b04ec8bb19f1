//! `vsim-odmr`: runs ODMR simulations from a scenario file and writes CSV/JSON
//! tables plus a run manifest.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vsim_core::SimError;

#[derive(Parser, Debug)]
#[command(name = "vsim-odmr", version, about = "Continuous-wave ODMR simulator for spin-3/2 V2 defect ensembles")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Scenario file (TOML). Defaults to the shipped scenario for the mode.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// RNG seed (overrides sensing.seed).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Defect classes in the inhomogeneous quadrature (overrides ensemble.quadrature).
    #[arg(long, global = true, value_name = "N")]
    pub quadrature: Option<usize>,
    /// Also write a gnuplot script next to each table.
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Resonant,
    Broadband,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// ODMR spectrum figure: contrast vs RF frequency, resonant and off-resonant excitation.
    OdmrSpectrum {
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
    },
    /// Power dependence figure: peak contrast and PL vs laser power for both excitation modes.
    PowerSweep,
    /// PLE figure: PL vs excitation wavelength across the inhomogeneous zero-phonon line.
    PleScan,
    /// Laser modulation figure: resonant contrast vs peak-to-peak modulation span.
    ModSweep,
    /// Temperature figure: resonant contrast vs temperature via the homogeneous linewidth.
    TempSweep,
    /// Sensitivity figure and summary table: field ASD from a synthetic lock-in record, measured vs shot-noise-limited sensitivity.
    Sensitivity {
        /// Also write the field-converted traces in the binary time-series format.
        #[arg(long)]
        timeseries: bool,
        /// Inject a test field tone of this amplitude (T) at sensing.inject_freq_hz.
        #[arg(long, value_name = "T")]
        inject: Option<f64>,
    },
    /// Sub-ensemble estimate: fraction of defects resonant with a narrow laser.
    Fraction {
        /// Homogeneous linewidth, μeV.
        #[arg(long, default_value_t = 0.6)]
        hom_uev: f64,
        /// Inhomogeneous linewidth, μeV.
        #[arg(long, default_value_t = 170.0)]
        inh_uev: f64,
    },
    /// Level diagram figure: ground-state levels and RF transition table.
    Transitions,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::OdmrSpectrum { .. } => "odmr-spectrum",
            Command::PowerSweep => "power-sweep",
            Command::PleScan => "ple-scan",
            Command::ModSweep => "mod-sweep",
            Command::TempSweep => "temp-sweep",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Fraction { .. } => "fraction",
            Command::Transitions => "transitions",
        }
    }
}

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Schema { .. } => 2,
        SimError::Io { .. } => 4,
        _ => 3,
    }
}

fn kind(e: &SimError) -> &'static str {
    match e {
        SimError::Schema { .. } => "schema",
        SimError::Io { .. } => "io",
        _ => "numerical",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let record = serde_json::json!({
                "error": kind(&e),
                "exit_code": code,
                "subcommand": cli.command.name(),
                "message": e.to_string(),
            });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
