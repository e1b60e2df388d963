//! `eselect` command-line interface.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 validation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eselect::commands;
use eselect::config::{ConfigLayer, GridDefaults};
use eselect::error::{HarnessError, EXIT_OK, EXIT_USAGE};
use eselect::validate::CheckKind;

#[derive(Debug, Parser)]
#[command(
    name = "eselect",
    version,
    about = "Anytime-valid forecast comparison and e-value based fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write per-step decisions.
    Run(Flags),
    /// Sweep λ and ω grids over every requested strategy.
    Sweep(Flags),
    /// Monte Carlo check of error rates and band coverage.
    Validate(Flags),
    /// Oracle and baseline scores of the input.
    Bench(Flags),
}

/// Every flag may also be set in the TOML file given by `--config`; flags win.
#[derive(Debug, Args)]
struct Flags {
    /// TOML file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input table: t, p_1..p_H, q_1..q_H, y_1..y_H.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Familywise level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Risk weight, list or range (e.g. 0.1 or 0.01:0.99:0.01).
    #[arg(long)]
    lambda: Option<String>,
    /// Window in steps or durations (4, 1h, 7d), list or range (1d:14d:1d).
    #[arg(long)]
    window: Option<String>,
    /// persistence, sampling or wavg (comma-separated for sweeps).
    #[arg(long)]
    strategy: Option<String>,
    /// Decision lag (steps or duration).
    #[arg(long)]
    lag: Option<String>,
    /// Calibration length (steps or duration).
    #[arg(long)]
    calibration: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Arm used before any evidence exists: p or q.
    #[arg(long)]
    initial_arm: Option<String>,
    /// strict (full windows only) or expanding.
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo replications (validate).
    #[arg(long)]
    replications: Option<usize>,
    /// Synthetic stream length (validate).
    #[arg(long)]
    length: Option<usize>,
}

impl Flags {
    fn layer(&self) -> eselect::Result<ConfigLayer> {
        let file = match &self.config {
            Some(path) => ConfigLayer::from_file(path)?,
            None => ConfigLayer::default(),
        };
        Ok(file.merged_with(ConfigLayer {
            input: self.input.clone(),
            alpha: self.alpha,
            lambda: self.lambda.clone(),
            window: self.window.clone(),
            strategy: self.strategy.clone(),
            lag: self.lag.clone(),
            calibration: self.calibration.clone(),
            seed: self.seed,
            initial_arm: self.initial_arm.clone(),
            warmup: self.warmup.clone(),
            output_dir: self.output_dir.clone(),
            threads: self.threads,
            replications: self.replications,
            length: self.length,
        }))
    }
}

fn execute(command: Command) -> eselect::Result<()> {
    match command {
        Command::Run(flags) => {
            let config = flags.layer()?.resolve(&GridDefaults::single())?;
            let out = commands::run(&config)?;
            let s = &out.run.summary;
            println!("sigma          {:.6}", out.run.transform.sigma());
            println!("scored steps   {} (warmup {})", s.steps_scored, s.warmup_steps);
            println!("average score  {:.4}", s.average_score);
            println!("baseline P     {:.4}", s.baseline_p);
            println!("baseline Q     {:.4}", s.baseline_q);
            println!("oracle         {:.4}", s.oracle);
            println!("better chosen  {:.4}", s.fraction_better_selected);
            println!("output         {}", out.dir.display());
        }
        Command::Sweep(flags) => {
            let config = flags.layer()?.resolve(&GridDefaults::sweep())?;
            let (outcome, dir) = commands::sweep(&config)?;
            for &strategy in &config.strategies {
                let (rate, kept) = outcome.improvement_rate(strategy);
                match outcome.best(strategy) {
                    Some(best) => println!(
                        "{:<12} best {:.4} at (lambda {}, window {}); improves on both inputs in {:.2}% of {} cells",
                        strategy.name(),
                        best.summary.average_score,
                        best.lambda,
                        eselect::config::format_duration(best.window),
                        100.0 * rate,
                        kept
                    ),
                    None => println!("{:<12} every cell excluded", strategy.name()),
                }
            }
            println!("output       {}", dir.display());
        }
        Command::Validate(flags) => {
            let config = flags.layer()?.resolve(&GridDefaults::validation())?;
            let (report, dir) = commands::validate(&config)?;
            for c in &report.checks {
                let (what, cmp) = match c.kind {
                    CheckKind::FwerPq => ("fwer H0(p,q)", "<="),
                    CheckKind::FwerQp => ("fwer H0(q,p)", "<="),
                    CheckKind::Coverage => ("coverage", ">="),
                };
                println!(
                    "{} {what:<13} {:<19} lambda {:<4} window {:<5} rate {:.4} {cmp} {:.4}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.stream,
                    c.lambda,
                    c.window,
                    c.rate,
                    c.bound
                );
            }
            println!("output {}", dir.display());
            let failed = report.failures().count();
            if failed > 0 {
                return Err(HarnessError::ValidationFailed {
                    failed,
                    total: report.checks.len(),
                });
            }
        }
        Command::Bench(flags) => {
            let config = flags.layer()?.resolve(&GridDefaults::single())?;
            let (b, dir) = commands::bench(&config)?;
            println!("steps       {}", b.steps);
            println!("oracle      {:.4}", b.oracle);
            println!("baseline P  {:.4}", b.baseline_p);
            println!("baseline Q  {:.4}", b.baseline_q);
            println!("output      {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
