//! `fluxquant`: spectra, wavefunctions, flux-step experiments, pulse
//! dynamics and parameter fits for a fluxonium, written as CSV/JSON.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 I/O,
//! 4 numerical failure (including time-step refinement that does not settle).

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{apply_override, load_document, resolve, set_path, with_defaults, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "fluxquant", version, about = "Fluxonium flux-allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels versus external flux.
    Spectrum(CommonArgs),
    /// Eigenfunctions and potential on a phase grid.
    Wavefunction(CommonArgs),
    /// Occupations after an instantaneous flux step.
    Sudden(CommonArgs),
    /// Time-domain propagation through a flux ramp.
    Dynamics(CommonArgs),
    /// Fit (E_C, E_J, E_L) to spectroscopy data.
    Fit {
        /// Observation file with header `flux,level_i,level_j,freq_ghz[,weight]`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (moved into $FLUXQUANT_OUT when that is set).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["inductor", "junction-complete", "junction-incomplete"])]
    allocation: Option<String>,
    /// Oscillator basis dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Preparation error probability.
    #[arg(long)]
    alpha: Option<f64>,
    /// Ramp duration in ns
    #[arg(long = "rise-ns")]
    rise_ns: Option<f64>,
    /// Initial time step in ns
    #[arg(long = "dt-ns")]
    dt_ns: Option<f64>,
    /// Number of levels (lowest `n` for the wavefunction command).
    #[arg(long)]
    levels: Option<usize>,
    /// Override a configuration key, e.g. `--set sudden.flux_b=0.8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy)]
enum Kind {
    Spectrum,
    Wavefunction,
    Sudden,
    Dynamics,
    Fit,
}

fn build_config(kind: Kind, args: &CommonArgs, data: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    let mut doc = with_defaults(load_document(args.config.as_deref())?);
    for s in &args.set {
        apply_override(&mut doc, s)?;
    }
    let mut flag = |key: &str, v: Value| set_path(&mut doc, key, v);
    if let Some(out) = &args.out {
        flag("out", json!(out))?;
    }
    if let Some(a) = &args.allocation {
        flag("allocation", json!(a))?;
    }
    if let Some(d) = args.dim {
        flag("basis_dim", json!(d))?;
    }
    if let Some(a) = args.alpha {
        flag("sudden.alpha", json!(a))?;
    }
    if let Some(r) = args.rise_ns {
        flag("dynamics.rise_ns", json!(r))?;
    }
    if let Some(dt) = args.dt_ns {
        flag("dynamics.dt_ns", json!(dt))?;
    }
    if let Some(n) = args.levels {
        match kind {
            Kind::Spectrum => flag("spectrum.levels", json!(n))?,
            Kind::Wavefunction => flag("wavefunction.levels", json!((0..n).collect::<Vec<_>>()))?,
            Kind::Sudden => flag("sudden.levels_b", json!(n))?,
            Kind::Dynamics => flag("dynamics.levels", json!(n))?,
            Kind::Fit => return Err(CliError::Invalid("--levels is not used by fit".into())),
        }
    }
    if let Some(path) = data {
        flag("fit.data", json!(path))?;
    }
    resolve(doc)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (kind, args, data) = match &cli.command {
        Command::Spectrum(a) => (Kind::Spectrum, a, None),
        Command::Wavefunction(a) => (Kind::Wavefunction, a, None),
        Command::Sudden(a) => (Kind::Sudden, a, None),
        Command::Dynamics(a) => (Kind::Dynamics, a, None),
        Command::Fit { data, common } => (Kind::Fit, common, data.as_ref()),
    };
    let cfg = build_config(kind, args, data)?;
    match kind {
        Kind::Spectrum => commands::spectrum(&cfg),
        Kind::Wavefunction => commands::wavefunction(&cfg),
        Kind::Sudden => commands::sudden(&cfg),
        Kind::Dynamics => commands::dynamics(&cfg),
        Kind::Fit => commands::fit(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fluxquant: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
