//! `actsched` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 invariant violation,
//! 4 oracle infeasible or instance too large.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actsched::doubling::{RecoverPolicy, DEFAULT_BOUND_CONSTANT};
use actsched::fractional::DEFAULT_BASE;
use actsched::harness::{
    run_pipeline, run_sweep, verify_logdir, write_run_logs, write_sweep, AlphaMode, RunConfig,
    SweepConfig,
};
use actsched::oracle::{oracle_if_small, EXHAUSTIVE_LIMIT};
use actsched::{generate, Error, GeneratorConfig, Instance, PtimeModel};
use anyhow::Context;
use clap::{Parser, Subcommand};

const EXIT_INPUT: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "actsched",
    version,
    about = "Online machine activation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random instance file.
    Gen {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "ACTSCHED_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "uniform")]
        model: PtimeModel,
        /// Shuffle the job arrival order.
        #[arg(long)]
        shuffle: bool,
        /// Output path; `.jsonl` writes a streaming trace.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance exactly and print the result as JSON.
    Oracle {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run one pipeline and write its logs.
    Run {
        #[arg(long = "in")]
        input: PathBuf,
        /// `oracle`, `double` or a fixed positive guess.
        #[arg(long, default_value = "oracle")]
        alpha: AlphaMode,
        #[arg(long, env = "ACTSCHED_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BASE)]
        a: f64,
        #[arg(long = "C", default_value_t = DEFAULT_BOUND_CONSTANT)]
        c: f64,
        /// Re-cover every earlier job after a doubling, not just the trigger.
        #[arg(long)]
        recover_all: bool,
        #[arg(long)]
        logdir: PathBuf,
    },
    /// Re-check all invariants from a log directory.
    Verify {
        #[arg(long)]
        logdir: PathBuf,
    },
    /// Run a seed grid from a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible(_) | Error::TooLarge { .. } | Error::NodeBudgetExhausted { .. } => {
                EXIT_ORACLE
            }
            Error::StalledStep { .. } | Error::StepCapExceeded { .. } => EXIT_INVARIANT,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_INPUT,
            error,
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, Error> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        Instance::load_trace(path)
    } else {
        Instance::load(path)
    }
}

fn print_csv<T: serde::Serialize>(row: &T) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(io::stdout().lock());
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen {
            m,
            n,
            seed,
            model,
            shuffle,
            out,
        } => {
            let config = GeneratorConfig {
                shuffle,
                ..GeneratorConfig::new(m, n, seed, model)
            };
            config.validate()?;
            let instance = generate(&config);
            if out.extension().is_some_and(|e| e == "jsonl") {
                instance.save_trace(&out)?;
            } else {
                instance.save(&out)?;
            }
        }
        Command::Oracle { input } => {
            let instance = load_instance(&input)?;
            let result = oracle_if_small(&instance)?.ok_or(Error::TooLarge {
                size: (instance.m() as f64).powi(instance.n() as i32),
                limit: EXHAUSTIVE_LIMIT,
            })?;
            let text = serde_json::to_string_pretty(&result).context("serializing result")?;
            println!("{text}");
        }
        Command::Run {
            input,
            alpha,
            seed,
            a,
            c,
            recover_all,
            logdir,
        } => {
            let instance = load_instance(&input)?;
            let config = RunConfig {
                alpha,
                seed,
                base: a,
                bound_constant: c,
                recover: if recover_all {
                    RecoverPolicy::AllJobs
                } else {
                    RecoverPolicy::TriggeringJob
                },
                ..RunConfig::default()
            };
            let run = run_pipeline(&instance, &config)?;
            write_run_logs(&logdir, &run)?;
            print_csv(&run.row)?;
            if !run.violations.is_empty() {
                for v in &run.violations {
                    eprintln!("violation: {v}");
                }
                return Err(Failure {
                    code: EXIT_INVARIANT,
                    error: anyhow::anyhow!("{} invariant violations", run.violations.len()),
                });
            }
        }
        Command::Verify { logdir } => {
            let report = verify_logdir(&logdir)?;
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            if !report.ok() {
                return Err(Failure {
                    code: EXIT_INVARIANT,
                    error: anyhow::anyhow!(
                        "{} violations in {} check groups",
                        report.violations.len(),
                        report.checks
                    ),
                });
            }
            println!("ok: {} check groups passed", report.checks);
        }
        Command::Sweep { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: SweepConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            let report = run_sweep(&cfg)?;
            write_sweep(&out, &report)?;
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(io::stdout().lock());
            for row in &report.summary {
                w.serialize(row).map_err(anyhow::Error::from)?;
            }
            w.flush().map_err(anyhow::Error::from)?;
            let violations: u64 = report.rows.iter().map(|r| r.invariant_violations).sum();
            if violations > 0 {
                return Err(Failure {
                    code: EXIT_INVARIANT,
                    error: anyhow::anyhow!("{violations} invariant violations across the sweep"),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = io::stdout().flush();
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
