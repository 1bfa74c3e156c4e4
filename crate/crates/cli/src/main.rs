use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levelk_core::harness::{self, ExperimentKind, HarnessError};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

#[derive(Parser)]
#[command(
    name = "levelk",
    version,
    about = "Run level-k game optimizer experiments and write CSV tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Final distance for every (algorithm, eta, c) cell
    Grid(Common),
    /// Per-step state log, optionally with reasoning chains
    Trajectory(Common),
    /// Bisection for the largest convergent step size per k
    Maxstep(Common),
    /// Final distance of Lv.k GP against k at a fixed step size
    DistVsK(Common),
    /// Averaged reasoning gaps for Lv.k Adam and Lv.k GP
    Cauchy(Common),
    /// Train the 8-Gaussians GAN
    GanTrain(Common),
    /// Check a trajectory against its convergence certificate
    Certify(Common),
}

#[derive(Args)]
struct Common {
    /// experiment config file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// output CSV (defaults to the config's `out`, then stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// overrides the config's seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl Command {
    fn parts(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::Grid(c) => (ExperimentKind::Grid, c),
            Command::Trajectory(c) => (ExperimentKind::Trajectory, c),
            Command::Maxstep(c) => (ExperimentKind::MaxStep, c),
            Command::DistVsK(c) => (ExperimentKind::DistanceVsK, c),
            Command::Cauchy(c) => (ExperimentKind::CauchyTable, c),
            Command::GanTrain(c) => (ExperimentKind::GanTrain, c),
            Command::Certify(c) => (ExperimentKind::Certify, c),
        }
    }
}

enum Failure {
    Config(String),
    Run(HarnessError),
    Io(String),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (kind, args) = cli.command.parts();
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    // the seed flag has to be in place before validation, which insists on
    // a seed for stochastic runs
    let text = match args.seed {
        Some(seed) => with_seed(&text, seed),
        None => text,
    };
    let cfg = harness::parse_config(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    if cfg.kind != kind {
        return Err(Failure::Config(format!(
            "{}: config is for `{}`, not `{}`",
            args.config.display(),
            cfg.kind.command(),
            kind.command()
        )));
    }
    let csv = harness::run_experiment(&cfg).map_err(Failure::Run)?;
    match args.out.clone().or_else(|| cfg.out.clone()) {
        Some(path) => {
            fs::write(&path, csv).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

/// Drops any `seed = …` line and appends the override.
fn with_seed(text: &str, seed: u64) -> String {
    let mut out: String = text
        .lines()
        .map(|line| {
            let key = line
                .split('#')
                .next()
                .unwrap_or("")
                .split('=')
                .next()
                .unwrap_or("")
                .trim();
            if key == "seed" {
                ""
            } else {
                line
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    out.push_str(&format!("\nseed = {seed}\n"));
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("levelk: config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) if e.is_config_error() => {
            eprintln!("levelk: config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) if e.is_numerical_blowup() => {
            eprintln!("levelk: {e}");
            ExitCode::from(EXIT_BLOWUP)
        }
        Err(Failure::Run(e)) => {
            eprintln!("levelk: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("levelk: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
