use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sncl_cli::config::ExperimentConfig;
use sncl_cli::presets;
use sncl_cli::runner::{load_config, run_experiment, Mode, RunError};

/// Stochastic nonlocal conservation laws: ensembles, diagnostics and
/// refinement ladders.
#[derive(Debug, Parser)]
#[command(name = "sncl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an ensemble and check the hard invariants.
    Solve(RunArgs),
    /// Solve and compute every diagnostic enabled in the configuration.
    Diagnose(RunArgs),
    /// Run the refinement ladders of the configuration.
    Ladder(RunArgs),
    /// List the presets, or print one as a TOML configuration.
    Presets { name: Option<String> },
    /// Check a configuration and report every violation.
    Validate { config: String },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file, or the name of a preset.
    config: String,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<String>,
    /// Print nothing but errors.
    #[arg(long, short)]
    quiet: bool,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, RunError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.master_seed = s;
    }
    if let Some(n) = args.paths {
        cfg.run.n_paths = n;
    }
    if let Some(o) = &args.out {
        cfg.run.output_dir = o.clone();
    }
    Ok(cfg)
}

fn run(args: &RunArgs, mode: Mode) -> Result<i32, RunError> {
    let cfg = load(args)?;
    let outcome = run_experiment(&cfg, mode)?;
    if !args.quiet {
        for (name, e) in outcome.report.entries() {
            let verdict = match e.passed {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            let gate = if e.gating { "gating" } else { "" };
            println!("{verdict:4}  {name:32} {gate}");
        }
        println!("{:?} -> {}", outcome.manifest.status, outcome.out_dir.display());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => run(a, Mode::Solve),
        Command::Diagnose(a) => run(a, Mode::Diagnose),
        Command::Ladder(a) => run(a, Mode::Ladder),
        Command::Presets { name: None } => {
            for p in presets::presets() {
                let tag = if p.demo_only { " [demo]" } else { "" };
                println!("{:20} {}{tag}", p.name, p.description);
            }
            Ok(0)
        }
        Command::Presets { name: Some(n) } => match presets::get(n) {
            Some(p) => {
                print!("{}", p.config.to_toml());
                Ok(0)
            }
            None => {
                eprintln!("unknown preset {n}");
                Ok(2)
            }
        },
        Command::Validate { config } => load_config(config).and_then(|cfg| {
            let v = cfg.violations();
            if v.is_empty() {
                println!("{}: valid", cfg.name);
                Ok(0)
            } else {
                Err(RunError::Config(sncl_cli::config::ConfigError(v)))
            }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
