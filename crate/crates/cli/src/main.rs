use std::path::PathBuf;
use std::process::ExitCode;

use acdl_core::harness::config::parse_values;
use acdl_core::harness::probes::dump_probes;
use acdl_core::harness::sweep::{point_seed, run_sweep};
use acdl_core::harness::{emit_results, Axis, ChainKind, Format, SimConfig};
use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "acdl-sim", version, about = "Monte Carlo BER and SNR sweeps for ACDL and baseline receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a sweep described by a TOML configuration.
    Simulate(SimulateArgs),
}

#[derive(Parser, Debug)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Sweep axis: eb_n0, sir, beta or threshold.
    #[arg(long)]
    axis: Option<Axis>,
    /// `start:step:stop` or a comma-separated list.
    #[arg(long)]
    values: Option<String>,
    /// Chain: acdl, linear, blanking or clipping.
    #[arg(long)]
    chain: Option<ChainKind>,
    /// Signal-to-impulsive-noise ratio in dB; `inf` disables impulsive noise.
    #[arg(long)]
    sir: Option<f64>,
    /// Tukey coefficient.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results file; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write probe traces and spectra for one trial at the first axis value.
    #[arg(long)]
    dump_probes: Option<PathBuf>,
}

fn configure(args: &SimulateArgs) -> anyhow::Result<SimConfig> {
    let mut cfg = SimConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(axis) = args.axis {
        cfg.sweep.axis = axis;
    }
    if let Some(v) = &args.values {
        cfg.sweep.values = parse_values(v)?;
    }
    if let Some(chain) = args.chain {
        cfg.sweep.chain = Some(chain);
    }
    if let Some(sir) = args.sir {
        cfg.noise.sir_db = sir;
    }
    if let Some(beta) = args.beta {
        cfg.acdl.beta = beta;
    }
    if let Some(seed) = args.seed {
        cfg.sweep.base_seed = seed;
        cfg.noise.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<bool> {
    let cfg = configure(args)?;
    if let Some(dir) = &args.dump_probes {
        let first = cfg.at(cfg.sweep.values[0]);
        let files = dump_probes(&first, point_seed(cfg.sweep.base_seed, 0), dir)?;
        eprintln!("wrote {} probe files to {}", files.len(), dir.display());
    }
    let outcome = run_sweep(&cfg)?;
    for r in &outcome.results {
        eprintln!(
            "{:>8} {:<16} ber {:.3e} [{:.3e}, {:.3e}] snr {:6.2} dB  {} bits  {:.1} s",
            r.axis_value, r.chain, r.ber, r.ber_ci_lo, r.ber_ci_hi, r.snr_db, r.bits, r.wall_time_s
        );
    }
    if !outcome.results.is_empty() {
        match &args.out {
            Some(path) => emit_results(&outcome.results, &cfg, path, Format::from_path(path))?,
            None => print!("{}", acdl_core::harness::emit::results_to_csv(&outcome.results)?),
        }
    }
    for f in &outcome.failures {
        eprintln!("error at {}: {}", f.axis_value, f.message);
    }
    Ok(outcome.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => match simulate(&args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
