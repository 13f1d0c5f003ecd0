mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn spec(m: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: m.into(),
        }
    }

    pub fn guard(m: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: m.into(),
        }
    }

    pub fn verify(m: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: m.into(),
        }
    }

    pub fn censored(m: impl Into<String>) -> Self {
        Failure {
            code: 5,
            message: m.into(),
        }
    }

    pub fn io(m: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: m.into(),
        }
    }

    pub fn other(m: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: m.into(),
        }
    }
}

pub struct Globals {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub guard_override: bool,
}

const EXIT_CODES: &str = "Exit codes: 0 success, 1 I/O or internal error, 2 invalid spec or config (including a missing seed), \
3 resource guard, 4 verification failure, 5 estimate dominated by censored replicas.";

#[derive(Parser)]
#[command(
    name = "opinion",
    version,
    about = "Exact landscape analysis and Metropolis experiments for the hidden-preference opinion model"
)]
#[command(after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replicas and enumeration.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "OPINION_OUT_DIR",
        default_value = "opinion-out"
    )]
    out: PathBuf,
    /// Raise the enumeration guards (25 sites for landscapes, area 16 and side 12 for polyominoes).
    #[arg(long, global = true)]
    guard_override: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Regime, stable and metastable sets, saddle height, barriers and gates.
    ///
    /// Writes analyze.json.
    Analyze,
    /// Reference paths with their energy profiles.
    ///
    /// Config key "paths" selects path names (default: every path valid in the regime).
    /// Writes path_<name>.csv with columns step,energy,is_saddle and
    /// paths.csv with columns path,states,max_elevation,closed_form,agrees.
    Paths,
    /// Minimal-perimeter polyominoes on small tori.
    ///
    /// Config keys "sides" (default [4,6,8]) and "max_area" (default 12).
    /// Writes polyominoes.csv with columns side,area,winding,min_perimeter,minimizer_count,classes.
    Enumerate,
    /// Exhaustive landscape of a small spec, or of a tube around a reference path.
    ///
    /// Full enumeration is limited to 16 sites unless --guard-override is given.
    /// Config key "tube" {"path", "window", "state_cap"} restricts to a tube; "betas" adds spectral gaps.
    /// Writes landscape.json, histogram.csv (energy,count), stability.csv (state,energy,stability_level,config)
    /// and, with betas, spectral_gap.csv (beta,gap,rate,residual,iterations).
    Bruteforce,
    /// Hitting times of the Metropolis chain between two endpoints.
    ///
    /// Needs a seed and "betas". Config keys "start", "target" (-1, +1, sigma_A; default: the first gate-table row),
    /// "replicas" (default 100), "step_cap" (default |V| exp(beta (barrier + 1))), "gates", "ks_threshold".
    /// Writes samples.csv with columns replica,beta,steps,censored,gate_tag,saddle_max and simulation.json.
    Simulate,
    /// Run the acceptance criteria.
    ///
    /// Config key "criteria" selects ids A1..A9 (default: all). Writes verify.csv with columns
    /// criterion,pass,seconds,explained,summary. Exits 4 if any criterion fails.
    Verify,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::spec("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::other(e.to_string()))?;
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref())?;
    let g = Globals {
        seed: cli.seed,
        out: cli.out,
        guard_override: cli.guard_override,
    };
    match cli.command {
        Command::Analyze => commands::analyze(&cfg, &g),
        Command::Paths => commands::paths(&cfg, &g),
        Command::Enumerate => commands::enumerate(&cfg, &g),
        Command::Bruteforce => commands::bruteforce(&cfg, &g),
        Command::Simulate => commands::simulate(&cfg, &g),
        Command::Verify => commands::verify(&cfg, &g),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
