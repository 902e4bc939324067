//! Experiment runner for the lattice Selkov simulator.
//!
//! Exit codes: 0 success, 2 configuration/condition violation, 1 runtime
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selkov_cli::config::{validate_config, StudyKind};
use selkov_cli::runner;

#[derive(Parser)]
#[command(name = "selkov", version, about = "Lattice Selkov BEM experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Parser)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides [output].directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Root seed; overrides [seeds].root_seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for independent trajectory tasks.
    #[arg(long, value_name = "K", default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a configuration, reporting violated conditions.
    Validate(RunArgs),
    /// Run a single trajectory per replicate and dump it as CSV.
    Simulate(RunArgs),
    /// Monte Carlo check of the mean-square bound.
    Moments(RunArgs),
    /// Monte Carlo tail-energy profile.
    Tails(RunArgs),
    /// Build numerical invariant measures by time averaging.
    Invariant(RunArgs),
    /// Distances between invariant measures at successive step sizes.
    DtStudy(RunArgs),
    /// Truncation study: coupled gaps and distances to the reference N.
    NStudy(RunArgs),
    /// Distance matrix toward the finest (dt, N) cell.
    DoubleLimit(RunArgs),
    /// Run the operator/scheme property suites and emit a pass/fail table.
    OpsCheck(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Validate(a)
            | Command::Simulate(a)
            | Command::Moments(a)
            | Command::Tails(a)
            | Command::Invariant(a)
            | Command::DtStudy(a)
            | Command::NStudy(a)
            | Command::DoubleLimit(a)
            | Command::OpsCheck(a) => a,
        }
    }

    fn study(&self) -> Option<StudyKind> {
        match self {
            Command::Validate(_) => None,
            Command::Simulate(_) => Some(StudyKind::Simulate),
            Command::Moments(_) => Some(StudyKind::Moments),
            Command::Tails(_) => Some(StudyKind::Tails),
            Command::Invariant(_) => Some(StudyKind::Invariant),
            Command::DtStudy(_) => Some(StudyKind::DtStudy),
            Command::NStudy(_) => Some(StudyKind::NStudy),
            Command::DoubleLimit(_) => Some(StudyKind::DoubleLimit),
            Command::OpsCheck(_) => Some(StudyKind::OpsCheck),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args().clone();

    let raw = match std::fs::read_to_string(&args.config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };

    // The subcommand names the effective study; validate uses the one in
    // the file.
    let effective = match cli.command.study() {
        Some(study) => {
            let mut doc: toml::Value = match toml::from_str(&raw) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: config parse error: {e}");
                    return ExitCode::from(2);
                }
            };
            match doc.as_table_mut() {
                Some(table) => {
                    table.insert("study".into(), toml::Value::String(study.id().to_string()));
                }
                None => {
                    eprintln!("error: config root must be a table");
                    return ExitCode::from(2);
                }
            }
            toml::to_string(&doc).expect("round-trip toml")
        }
        None => raw.clone(),
    };

    let mut config = match validate_config(&effective) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seeds.root_seed = seed;
    }

    if matches!(cli.command, Command::Validate(_)) {
        println!("configuration valid: study={}", config.study.id());
        return ExitCode::SUCCESS;
    }

    let out_dir = args
        .out
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    match runner::run(&config, effective.as_bytes(), &out_dir, args.workers.max(1)) {
        Ok(manifest) => {
            println!(
                "{}: {} output file(s) in {} ({:.2}s)",
                manifest.study,
                manifest.outputs.len(),
                out_dir.display(),
                manifest.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_condition = matches!(
                e.downcast_ref::<selkov_lattice::CoreError>(),
                Some(selkov_lattice::CoreError::ConfigRejected { .. })
            );
            ExitCode::from(if is_condition { 2 } else { 1 })
        }
    }
}
