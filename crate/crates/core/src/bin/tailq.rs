use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailq::experiment::{exit_code, run_experiment, ExperimentConfig, ExperimentKind, GridSpec, CHECK_FAILED};
use tailq::{DistributionSpec, Error};

/// Simulate a single-server FIFO queue with Bernoulli feedback and compare
/// its tails against the heavy-tail asymptotes.
///
/// Settings come from the TOML file given by --config; flags override it.
/// Exit status: 0 success, 2 config error, 3 simulation error, 4 failed
/// --check.
#[derive(Parser, Debug)]
#[command(name = "tailq", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment kind named in the config file.
    Run(Overrides),
    /// Queue-length and service-count means against their closed forms.
    ValidateMeans(Overrides),
    /// Busy-period length tail.
    BusyTail(Overrides),
    /// Customers-per-busy-period tail.
    CountTail(Overrides),
    /// Sojourn tail of a customer arriving to an empty system.
    SojournTail(Overrides),
    /// Tail of the k-th completion epoch (--k).
    FiniteTk(Overrides),
    /// Customer-stationary sojourn tail from regenerative cycles.
    StationaryTail(Overrides),
    /// Single-big-jump attribution (busy periods, or stationary with --regime).
    Psbj(Overrides),
    /// Sojourn exceedances split by visit, queue length and big service (--x).
    Decomposition(Overrides),
    /// Completion epochs after a forced big service (--k, --y-over-b).
    FluidCheck(Overrides),
    /// Print a config file with every setting at its default.
    Init {
        /// Experiment kind to put in the template.
        kind: String,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed; replication j always uses stream (seed, j).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Does not affect results.
    #[arg(long, env = "TAILQ_THREADS")]
    workers: Option<usize>,
    /// Replications, busy periods or regenerative cycles.
    #[arg(long)]
    reps: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 4 unless every built-in check passes.
    #[arg(long)]
    check: bool,
    /// Inter-arrival law, e.g. "exp(rate=0.2)".
    #[arg(long)]
    arrival: Option<DistributionSpec>,
    /// Service law, e.g. "pareto(shape=2.5, scale=0.6)".
    #[arg(long)]
    service: Option<DistributionSpec>,
    /// Feedback probability p in [0, 1).
    #[arg(long)]
    feedback_p: Option<f64>,
    /// Explicit comma-separated threshold grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Completion index (finite-tk) or forced cycle (fluid-check).
    #[arg(long)]
    k: Option<usize>,
    /// Threshold for decomposition.
    #[arg(long)]
    x: Option<f64>,
    /// Forced service size in mean service times (fluid-check).
    #[arg(long)]
    y_over_b: Option<f64>,
    /// busy or stationary (psbj).
    #[arg(long)]
    regime: Option<String>,
}

fn config_for(kind: Option<ExperimentKind>, o: Overrides) -> Result<(ExperimentConfig, bool), Error> {
    let mut cfg = match (&o.config, kind) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(kind)) => ExperimentConfig::new(kind),
        (None, None) => {
            return Err(Error::Config {
                key: "config".into(),
                message: "`run` needs --config".into(),
            })
        }
    };
    if let Some(kind) = kind {
        cfg.kind = kind;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.workers {
        cfg.workers = v;
    }
    if let Some(v) = o.reps {
        cfg.replications = v;
    }
    if let Some(v) = o.out {
        cfg.out = v;
    }
    if let Some(v) = o.arrival {
        cfg.model.arrival = v;
    }
    if let Some(v) = o.service {
        cfg.model.service = v;
    }
    if let Some(v) = o.feedback_p {
        cfg.model.feedback_p = v;
    }
    if let Some(v) = o.grid {
        cfg.grid = GridSpec::Explicit(v);
    }
    if let Some(v) = o.k {
        cfg.options.k = v;
    }
    if let Some(v) = o.x {
        cfg.options.x = Some(v);
    }
    if let Some(v) = o.y_over_b {
        cfg.options.y_over_b = v;
    }
    if let Some(v) = o.regime {
        cfg.options.regime = match v.as_str() {
            "busy" => tailq::experiment::Regime::Busy,
            "stationary" => tailq::experiment::Regime::Stationary,
            other => {
                return Err(Error::Config {
                    key: "regime".into(),
                    message: format!("expected busy or stationary, got {other:?}"),
                })
            }
        };
    }
    Ok((cfg, o.check))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, overrides) = match cli.command {
        Command::Init { kind } => {
            return match kind.parse::<ExperimentKind>() {
                Ok(kind) => {
                    let cfg = ExperimentConfig::new(kind).resolve().expect("default config is valid");
                    print!("{}", cfg.to_toml());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            };
        }
        Command::Run(o) => (None, o),
        Command::ValidateMeans(o) => (Some(ExperimentKind::ValidateMeans), o),
        Command::BusyTail(o) => (Some(ExperimentKind::BusyTail), o),
        Command::CountTail(o) => (Some(ExperimentKind::CountTail), o),
        Command::SojournTail(o) => (Some(ExperimentKind::SojournTail), o),
        Command::FiniteTk(o) => (Some(ExperimentKind::FiniteTk), o),
        Command::StationaryTail(o) => (Some(ExperimentKind::StationaryTail), o),
        Command::Psbj(o) => (Some(ExperimentKind::Psbj), o),
        Command::Decomposition(o) => (Some(ExperimentKind::Decomposition), o),
        Command::FluidCheck(o) => (Some(ExperimentKind::FluidCheck), o),
    };
    let (cfg, check) = match config_for(kind, overrides) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    match run_experiment(&cfg) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.stats.dropped > 0 {
                println!("dropped {} replications over the event budget", report.stats.dropped);
            }
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if check && !report.all_passed() {
                ExitCode::from(CHECK_FAILED as u8)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e) as u8)
}
