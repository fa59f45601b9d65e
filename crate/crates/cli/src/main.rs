use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frac_cli::cli_io::artifacts::verify;
use frac_cli::cli_io::config::{parse_config, ExperimentKind};
use frac_cli::cli_io::experiments::run_experiment;
use frac_cli::cli_io::synth::{read_spec, run_synth};
use frac_cli::cli_io::{Result, Status};

/// Fractional Hartree experiments. Exit status: 0 completed, 2 completed
/// with warnings, 1 error.
#[derive(Parser)]
#[command(name = "frac", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// overrides output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    Evolve(RunArgs),
    Decompose(RunArgs),
    WaveOperator(RunArgs),
    BlowupScan(RunArgs),
    MinimalMass(RunArgs),
    NonlinearCheck(RunArgs),
    /// write a synthetic profile mixture
    Synth {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// re-hash a run directory and check every artifact stamp
    Verify { dir: PathBuf },
}

fn run_kind(kind: ExperimentKind, a: RunArgs) -> Result<Status> {
    let mut cfg = parse_config(&a.config)?;
    if cfg.kind != kind {
        return Err(frac_cli::cli_io::CliError::Format {
            path: a.config,
            msg: format!("config is for `{}`, not `{kind}`", cfg.kind),
        });
    }
    if let Some(o) = a.out {
        cfg.out_dir = o;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let out = run_experiment(&cfg)?;
    eprintln!("wrote {}", out.manifest.display());
    Ok(out.status)
}

fn run(cli: Cli) -> Result<Status> {
    match cli.cmd {
        Cmd::Evolve(a) => run_kind(ExperimentKind::Evolve, a),
        Cmd::Decompose(a) => run_kind(ExperimentKind::Decompose, a),
        Cmd::WaveOperator(a) => run_kind(ExperimentKind::WaveOperator, a),
        Cmd::BlowupScan(a) => run_kind(ExperimentKind::BlowupScan, a),
        Cmd::MinimalMass(a) => run_kind(ExperimentKind::MinimalMass, a),
        Cmd::NonlinearCheck(a) => run_kind(ExperimentKind::NonlinearCheck, a),
        Cmd::Synth { profiles, out, seed } => {
            let mut spec = read_spec(&profiles)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            run_synth(&spec, &out)
        }
        Cmd::Verify { dir } => {
            let r = verify(&dir)?;
            println!("ok: {} run {}, {} artifacts verified", r.kind, r.config_hash, r.artifacts);
            Ok(Status::Completed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => {
            if let Status::Warnings(w) = &status {
                for m in w {
                    eprintln!("warning: {m}");
                }
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
