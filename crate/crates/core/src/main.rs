use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use neuroidbench::bundle::write_bundle;
use neuroidbench::evaluation::{Attacker, Scheme};
use neuroidbench::orchestrator::{self, CellStatus, Overrides, RunOptions};
use neuroidbench::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(name = "neuroidbench", version, about = "Benchmark ERP-based brainwave authentication pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvaluationArg {
    Single,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackerArg {
    Known,
    Unknown,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a benchmark configuration and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `results/<config name>`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum)]
        evaluation: Option<EvaluationArg>,
        #[arg(long, value_enum)]
        attacker: Option<AttackerArg>,
    },
    /// Parse a configuration and print it with every default filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic dataset as an epoch bundle.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        subjects: usize,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0.8)]
        separability: f64,
        #[arg(long, default_value_t = 0.0)]
        drift: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn read_config(path: &PathBuf) -> Result<orchestrator::ParsedConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    orchestrator::parse_config_recorded(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, output, seed, jobs, evaluation, attacker } => {
            let parsed = match read_config(&config) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut cfg = parsed.config;
            cfg.apply(&Overrides {
                seed,
                scheme: evaluation.map(|e| match e {
                    EvaluationArg::Single => Scheme::SingleSession,
                    EvaluationArg::Multi => Scheme::MultiSession,
                }),
                attacker: attacker.map(|a| match a {
                    AttackerArg::Known => Attacker::Known,
                    AttackerArg::Unknown => Attacker::Unknown,
                }),
            });
            let output = output.unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
            let opts = RunOptions { jobs, defaulted: parsed.defaulted };
            match orchestrator::run(&cfg, &output, &opts) {
                Ok(record) => {
                    for (i, cell) in record.cells.iter().enumerate() {
                        match &cell.status {
                            CellStatus::Completed => eprintln!("ok      {}", cell.id(i)),
                            CellStatus::Failed { error } => eprintln!("FAILED  {}: {error}", cell.id(i)),
                        }
                    }
                    eprintln!("reports written to {}", output.display());
                    if record.all_completed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Validate { config } => match read_config(&config) {
            Ok(p) => {
                print!("{}", orchestrator::emit_config(&p.config));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Generate { out, subjects, sessions, epochs, separability, drift, seed } => {
            let cfg = SynthConfig {
                n_subjects: subjects,
                n_sessions: sessions,
                epochs_per_session: epochs,
                subject_separability: separability,
                session_drift: drift,
                seed,
                ..SynthConfig::default()
            };
            let written = synth::generate(&cfg).and_then(|(m, recs)| write_bundle(&m, &recs, &out));
            match written {
                Ok(()) => {
                    eprintln!("bundle written to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
