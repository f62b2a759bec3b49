use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sqzspec::commands::{self, ContrastPreset, OutputFormat};
use sqzspec::config::QuadratureArg;
use sqzspec::CliError;

/// Squeezed-vacuum cavity spectroscopy: synthesize homodyne noise spectra of
/// a detuned ring cavity and estimate its parameters from measured traces.
#[derive(Parser)]
#[command(name = "sqzspec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a noisy analyzer trace plus the noiseless model curve.
    Simulate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the measurement seed from the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a trace and report parameter estimates with uncertainties.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Trace file to fit.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Extra masked interval LO:HI in hertz (repeatable).
        #[arg(long = "mask", value_parser = parse_mask)]
        masks: Vec<(f64, f64)>,
        /// Quadrature selection override: 1, 2, or both.
        #[arg(long, value_enum)]
        quadrature: Option<QuadratureArg>,
        /// Stdout format for the result summary.
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Signal-contrast table for a given input state.
    Contrast {
        /// First-quadrature input level, dB relative to shot noise.
        #[arg(long, allow_negative_numbers = true)]
        v1_db: Option<f64>,
        /// Second-quadrature input level, dB relative to shot noise.
        #[arg(long, allow_negative_numbers = true)]
        v2_db: Option<f64>,
        /// Reference input state instead of explicit levels.
        #[arg(long, value_enum)]
        preset: Option<ContrastPreset>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Sweep one model parameter and tabulate linewidth, Q, finesse, and
    /// the spectrum feature.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parameter name (e.g. sqrt_r1r2r3, omega_d_hz).
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Number of sweep points.
        #[arg(long)]
        steps: usize,
        /// Also write the table into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Check a configuration file and echo its fully resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_mask(raw: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = raw
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got {raw:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("cannot parse {lo:?} as hertz"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("cannot parse {hi:?} as hertz"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err("mask needs finite LO < HI".into());
    }
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Fit { config, trace, out, masks, quadrature, format } => {
            commands::fit(&config, &trace, &out, &masks, quadrature, format)
        }
        Command::Contrast { v1_db, v2_db, preset, format } => {
            commands::contrast(v1_db, v2_db, preset, format)
        }
        Command::Sweep { config, param, from, to, steps, out, format } => {
            commands::sweep(&config, &param, from, to, steps, out, format)
        }
        Command::Validate { config } => commands::validate(&config),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
