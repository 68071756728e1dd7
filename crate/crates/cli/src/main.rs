//! `esample`: batch front end for the sampling/harvesting simulator.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 usage or configuration
//! error, 3 numerical non-convergence.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Behavioral simulator for an ADC front end that harvests energy during hold.
#[derive(Debug, Parser)]
#[command(name = "esample", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario; writes trace.csv, codes.csv, spectrum.csv and summary.json.
    Run {
        config: PathBuf,
    },
    /// Re-run a scenario over a list of parameter values; writes sweep.csv.
    Sweep {
        config: PathBuf,
        /// alpha, c_eh, v_drop, r_on_s1, n_bits or f_s
        #[arg(long)]
        param: String,
        /// Comma-separated list or `start:stop:step` (inclusive).
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Storage capacitance for a load current and tolerated ripple.
    SizeCap {
        #[arg(long, allow_hyphen_values = true)]
        i_load: f64,
        #[arg(long, allow_hyphen_values = true)]
        t_p: f64,
        #[arg(long, allow_hyphen_values = true)]
        delta_v: f64,
    },
    /// SNDR/ENOB of a codes CSV (`period,code,v_sampled,saturated`).
    Analyze {
        codes_csv: PathBuf,
        #[arg(long)]
        n_bits: u32,
        #[arg(long)]
        v_ref: f64,
        #[arg(long)]
        f_s: f64,
        #[arg(long)]
        signal_bin: usize,
        /// Use only the first N codes; defaults to the whole file.
        #[arg(long)]
        n_fft: Option<usize>,
        /// Spectrum output path; defaults to spectrum.csv in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => commands::run(&config),
        Command::Sweep {
            config,
            param,
            values,
            jobs,
        } => commands::sweep(&config, &param, &values, jobs),
        Command::SizeCap {
            i_load,
            t_p,
            delta_v,
        } => commands::size_cap(i_load, t_p, delta_v),
        Command::Analyze {
            codes_csv,
            n_bits,
            v_ref,
            f_s,
            signal_bin,
            n_fft,
            out,
        } => commands::analyze(&codes_csv, n_bits, v_ref, f_s, signal_bin, n_fft, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esample: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
