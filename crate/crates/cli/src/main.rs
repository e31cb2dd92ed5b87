//! `sbpnet`: heavy-traffic analysis and simulation of multiclass networks
//! under static buffer priority.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbpnet_core::Error;

#[derive(Debug, Parser)]
#[command(name = "sbpnet", version, about)]
struct Cli {
    /// Worker threads for replications and policy fan-out.
    #[arg(long, global = true, env = "SBPNET_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration file and report every problem found.
    Validate { config: PathBuf },
    /// Compute the matrices and heavy-traffic constants of the configured policy.
    Analyze {
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulate the configured policy and compare with the analytic laws.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Rank every static priority policy by its cycle-time estimate.
    Optimize {
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Upper bound on the number of enumerated policies.
        #[arg(long)]
        max_policies: Option<u64>,
    },
    /// Compare simulated idle fractions with the exact idle probabilities.
    IdleCheck {
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit with status 2 when a heavy-traffic assumption fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args, Default)]
struct SimArgs {
    /// External arrivals per replication (accepts 2e7).
    #[arg(long, value_parser = parse_count)]
    arrivals: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    warmup_frac: Option<f64>,
    /// Record the joint law of classes i and j (1-based), e.g. `--joint 1,4`.
    #[arg(long, value_parser = parse_pair)]
    joint: Vec<(usize, usize)>,
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("not a nonnegative integer: {s}"))
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected i,j, got {s}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad class {a}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad class {b}"))?;
    if a == 0 || b == 0 || a == b {
        return Err(format!("need two distinct 1-based classes, got {s}"));
    }
    Ok((a, b))
}

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_ASSUMPTION: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let result = match cli.command {
        Command::Validate { config } => commands::validate(&config),
        Command::Analyze { config, common } => commands::analyze(&config, &common.out, common.strict),
        Command::Simulate { config, common, sim } => {
            commands::simulate(&config, &common.out, common.strict, &sim.into())
        }
        Command::Optimize {
            config,
            common,
            max_policies,
        } => commands::optimize(&config, &common.out, max_policies),
        Command::IdleCheck { config, common, sim } => {
            commands::idle_check(&config, &common.out, &sim.into())
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = match &e {
                commands::Failure::Core(Error::InvalidSpec(diags)) => {
                    for d in diags {
                        eprintln!("error: {d}");
                    }
                    return ExitCode::from(EXIT_VALIDATION);
                }
                commands::Failure::Core(Error::Config(_) | Error::PolicyMismatch(_)) => EXIT_VALIDATION,
                _ => EXIT_RUNTIME,
            };
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}

impl From<SimArgs> for commands::SimOverrides {
    fn from(a: SimArgs) -> Self {
        Self {
            arrivals: a.arrivals,
            reps: a.reps,
            seed: a.seed,
            warmup_frac: a.warmup_frac,
            joint: a.joint,
        }
    }
}
