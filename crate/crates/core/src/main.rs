//! Command-line front end. Exit status: 0 on full success, 1 when any task
//! or the command fails, 2 on invalid usage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{Level, LevelFilter, Log, Metadata, Record};

use spatial_nmix::commands::{self, DiagnoseArgs, EvaluateArgs, Outcome, RunOverrides, SimulateArgs, SummarizeArgs};

#[derive(Parser)]
#[command(name = "spatial-nmix", version, about = "Spatially misaligned joint-species N-mixture models")]
struct Cli {
    /// Print progress messages to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config's `workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// Gzip the per-chain sample files.
    #[arg(long)]
    gzip: bool,
}

impl RunFlags {
    fn overrides(&self) -> RunOverrides {
        RunOverrides {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            gzip: self.gzip,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its truth and a run config.
    Simulate {
        /// Simulation config JSON; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Generation seed.
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Keep this percentage of visit rows.
        #[arg(long)]
        retention: Option<f64>,
    },
    /// Fit one cull scenario: the configured κ, or the band means.
    Fit(RunFlags),
    /// Sample cull scenarios from the bands and fit each.
    FitScenarios {
        #[command(flatten)]
        run: RunFlags,
        /// Number of sampled scenarios.
        #[arg(long)]
        n_scenarios: usize,
    },
    /// Regional and total abundance summaries of a finished run.
    Summarize {
        /// Run directory written by fit or fit-scenarios.
        #[arg(long)]
        run: PathBuf,
        /// Output directory; defaults to <run>/summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pool the draws of every scenario.
        #[arg(long)]
        pooled: bool,
        /// Scenario to summarise when the run holds several.
        #[arg(long, conflicts_with = "pooled")]
        scenario: Option<usize>,
        /// Pool even when some scenario fits failed.
        #[arg(long, requires = "pooled")]
        allow_partial: bool,
    },
    /// Run the simulation study: RMSE, coverage, totals, correlations.
    #[command(alias = "study")]
    Evaluate {
        /// Study config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// R-hat and effective sample size for every stored parameter.
    Diagnose {
        /// Run directory written by fit or fit-scenarios.
        #[arg(long)]
        run: PathBuf,
        /// Output directory; defaults to <run>/diagnostics.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail when any parameter exceeds the R-hat threshold.
        #[arg(long)]
        strict: bool,
    },
}

struct StderrLog;

impl Log for StderrLog {
    fn enabled(&self, _: &Metadata) -> bool {
        true
    }

    fn log(&self, record: &Record) {
        if self.enabled(record.metadata()) {
            eprintln!("[{}] {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { Level::Info } else { Level::Warn };
    static LOGGER: StderrLog = StderrLog;
    log::set_logger(&LOGGER).expect("logger set once");
    log::set_max_level(LevelFilter::from(level.to_level_filter()));

    let result = match &cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            retention,
        } => commands::simulate(&SimulateArgs {
            config: config.clone(),
            seed: *seed,
            out: out.clone(),
            retention: *retention,
        }),
        Command::Fit(run) => commands::fit(&run.config, &run.overrides()),
        Command::FitScenarios { run, n_scenarios } => {
            commands::fit_scenarios(&run.config, *n_scenarios, &run.overrides())
        }
        Command::Summarize {
            run,
            out,
            pooled,
            scenario,
            allow_partial,
        } => commands::summarize(&SummarizeArgs {
            run: run.clone(),
            out: out.clone(),
            pooled: *pooled,
            scenario: *scenario,
            allow_partial: *allow_partial,
        }),
        Command::Evaluate { config, out, workers } => commands::evaluate(&EvaluateArgs {
            config: config.clone(),
            out: out.clone(),
            workers: *workers,
        }),
        Command::Diagnose { run, out, strict } => commands::diagnose(&DiagnoseArgs {
            run: run.clone(),
            out: out.clone(),
            strict: *strict,
        }),
    };
    report(result)
}

fn report(result: spatial_nmix::Result<Outcome>) -> ExitCode {
    match result {
        Ok(outcome) => {
            for t in outcome.manifest.failed_tasks() {
                eprintln!("task {} failed: {}", t.name, t.message.as_deref().unwrap_or("unknown error"));
            }
            println!(
                "{} files written to {}",
                outcome.manifest.files.len(),
                outcome.out_dir.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
