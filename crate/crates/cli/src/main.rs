use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mfschrod::config::{parse_config, RunConfig};
use mfschrod::csvio::format_real;
use mfschrod::experiments::runner;
use mfschrod::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Verb {
    /// Run one solver at `solve.z`.
    Solve,
    /// Build and archive the surrogate.
    Offline,
    /// Evaluate an archived surrogate at `solve.z`.
    Online,
    /// Offline build, error sweep and optional bound/collocation stages.
    Experiment,
    /// Empirical error bounds for an archived surrogate.
    Bound,
    /// Stochastic-collocation error table.
    ScTable,
    /// Norm of d(rho)/dz for several eps.
    Diagnose,
}

/// Multi-fidelity uncertainty quantification for the semiclassical
/// Schrödinger equation.
#[derive(Debug, Parser)]
#[command(name = "mfschrod", version)]
struct Cli {
    #[arg(value_enum)]
    verb: Verb,
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a config value, e.g. `--set uq.M=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `outputs.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_config() => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Stage { source, .. } => exit_code(source),
        _ => EXIT_NUMERICAL,
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| Error::Config {
        key: None,
        line: None,
        message: format!("cannot read {}: {e}", cli.config.display()),
    })?;
    let mut overrides = cli.overrides.clone();
    if let Some(out) = &cli.out {
        let s = out.to_string_lossy().replace('\\', "\\\\").replace('"', "\\\"");
        overrides.push(format!("outputs.dir=\"{s}\""));
    }
    parse_config(&text, &overrides)
}

fn run(cli: &Cli) -> Result<runner::RunSummary> {
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config {
                key: None,
                line: None,
                message: "--threads must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    match cli.verb {
        Verb::Solve => runner::run_solve(&cfg),
        Verb::Offline => runner::run_offline(&cfg),
        Verb::Online => runner::run_online(&cfg),
        Verb::Experiment => runner::run_experiment(&cfg),
        Verb::Bound => runner::run_bound(&cfg),
        Verb::ScTable => runner::run_sc_table(&cfg),
        Verb::Diagnose => runner::run_diagnose(&cfg),
    }
}

fn report(s: &runner::RunSummary) {
    if let Some(t) = &s.errors {
        println!("{}", t.headers.join("\t"));
        for r in 0..t.rows() {
            let row: Vec<String> = t.columns.iter().map(|c| format_real(c[r])).collect();
            println!("{}", row.join("\t"));
        }
    }
    for f in &s.files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(s) => {
            report(&s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
