//! `repack`: batch command line for repacking feasibility experiments.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use repack_core::analytics::SolutionIdentity;
use repack_core::montecarlo::TrialBackend;

use config::{ExperimentConfig, SolverChoice};
use output::Output;

#[derive(Parser, Debug)]
#[command(
    name = "repack",
    version,
    about = "Spectrum repacking feasibility and clearing experiments"
)]
struct Cli {
    /// Experiment config (TOML). Flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Per-solve time budget in seconds; 0 disables it.
    #[arg(long, global = true)]
    timeout_secs: Option<u64>,
    /// SAT backend. `external` runs the command in REPACK_EXTERNAL_SOLVER.
    #[arg(long, global = true, value_enum)]
    backend: Option<SolverChoice>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct InstanceArgs {
    /// CSV directory or canonical JSON instance.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Clearing target in MHz (repeatable).
    #[arg(long = "target")]
    targets: Vec<u32>,
    /// Ignore per-station domain constraints.
    #[arg(long)]
    no_domain: bool,
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// Cap on cleared stations nationwide.
    #[arg(long)]
    max_cleared: Option<usize>,
    /// Cap on DMAs containing a cleared station.
    #[arg(long)]
    max_dmas: Option<usize>,
    /// Force every station onto a channel.
    #[arg(long)]
    repack_all: bool,
    /// Station id that must stay on air (repeatable).
    #[arg(long)]
    must_repack: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance as a CSV set.
    Gen {
        #[arg(long)]
        stations: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        dmas: Option<usize>,
        #[arg(long)]
        co_density: Option<f64>,
        /// Plant a co-channel clique: SIZE or SIZE:DMA (repeatable).
        #[arg(long)]
        plant: Vec<String>,
    },
    /// Write the DIMACS encoding and its variable map.
    Encode {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Run one feasibility check.
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Minimum number of stations cleared nationwide.
    MinClear {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Minimum number of DMAs with a clearing.
    MinDmas {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Minimum clearings per DMA, each minimized on its own.
    MinDmaIsolated {
        #[command(flatten)]
        instance: InstanceArgs,
        /// DMA id (repeatable; default all).
        #[arg(long = "dma")]
        dmas: Vec<u32>,
        /// Known nationwide minimum; computed when absent.
        #[arg(long)]
        nationwide_min: Option<usize>,
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Sample solutions near the nationwide minimum.
    Sample {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Samples per target and buffer.
        #[arg(long)]
        count: Option<usize>,
        /// Slack over the minimum (repeatable).
        #[arg(long = "buffer")]
        buffers: Vec<usize>,
    },
    /// Monte Carlo success probability under participation models.
    Simulate {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Model as KIND[:key=value,...], e.g. random-affiliates:alpha=0.6 (repeatable).
        #[arg(long = "model")]
        models: Vec<String>,
        /// Sweep alpha over these values with shared randomness (repeatable).
        #[arg(long = "alpha")]
        alphas: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// sat, clique-then-sat or clique-only.
        #[arg(long)]
        trial_backend: Option<TrialBackend>,
        /// Clique catalog to use instead of building one.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Build a co-channel clique catalog.
    Cliques {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        min_size: Option<usize>,
        #[arg(long)]
        attempts: Option<usize>,
    },
    /// Analytics tables from stored sample sets and trial files.
    Stats {
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Sample set written by `sample` (repeatable).
        #[arg(long = "samples")]
        samples: Vec<PathBuf>,
        /// Trial file written by `simulate` (repeatable).
        #[arg(long = "trials")]
        trials: Vec<PathBuf>,
        /// `min_dmas.csv` from `min-dmas`, merged into the DMA count table.
        #[arg(long)]
        min_dmas: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full-assignment")]
        identity: IdentityArg,
        /// Correlations: minimum mean clearings per DMA.
        #[arg(long, default_value_t = 2.0)]
        min_mean: f64,
        /// Correlations: maximum p-value.
        #[arg(long, default_value_t = 0.01)]
        p_threshold: f64,
        /// Correlations: keep only r at or below this.
        #[arg(long, allow_hyphen_values = true)]
        max_r: Option<f64>,
    },
    /// Solve a DIMACS file and print the result in competition format.
    Sat { file: PathBuf },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum IdentityArg {
    FullAssignment,
    ClearedSet,
}

impl From<IdentityArg> for SolutionIdentity {
    fn from(a: IdentityArg) -> Self {
        match a {
            IdentityArg::FullAssignment => SolutionIdentity::FullAssignment,
            IdentityArg::ClearedSet => SolutionIdentity::ClearedSet,
        }
    }
}

/// Marker context for configuration errors.
#[derive(Debug)]
struct InvalidConfig;

impl std::fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid configuration")
    }
}

impl Cli {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        if let Some(t) = self.timeout_secs {
            c.timeout_secs = t;
        }
        if let Some(b) = self.backend {
            c.backend = b;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        match &self.command {
            Command::Encode { instance, .. }
            | Command::Solve { instance, .. }
            | Command::MinClear { instance }
            | Command::MinDmas { instance }
            | Command::MinDmaIsolated { instance, .. }
            | Command::Sample { instance, .. }
            | Command::Simulate { instance, .. } => instance.apply(&mut c),
            Command::Cliques { instance, .. } | Command::Stats { instance, .. } => {
                if instance.is_some() {
                    c.instance = instance.clone();
                }
            }
            Command::Gen { .. } | Command::Sat { .. } => {}
        }
        match &self.command {
            Command::MinDmaIsolated { slack: Some(s), .. } => c.slack = *s,
            Command::Sample { count, buffers, .. } => {
                if let Some(n) = count {
                    c.samples = *n;
                }
                if !buffers.is_empty() {
                    c.buffers = buffers.clone();
                }
            }
            Command::Simulate {
                models,
                alphas,
                trials,
                trial_backend,
                catalog,
                ..
            } => {
                if !models.is_empty() {
                    c.models = models
                        .iter()
                        .map(|m| commands::parse_model(m))
                        .collect::<Result<_>>()?;
                }
                if !alphas.is_empty() {
                    c.alphas = alphas.clone();
                }
                if let Some(t) = trials {
                    c.trials = *t;
                }
                if let Some(b) = trial_backend {
                    c.trial_backend = *b;
                }
                if catalog.is_some() {
                    c.catalog = catalog.clone();
                }
            }
            Command::Cliques {
                min_size, attempts, ..
            } => {
                if let Some(m) = min_size {
                    c.cliques.min_size = *m;
                }
                if let Some(a) = attempts {
                    c.cliques.attempts_per_vertex = *a;
                }
            }
            Command::Gen {
                stations,
                channels,
                dmas,
                co_density,
                plant,
            } => {
                let s = &mut c.synthetic;
                s.stations = stations.unwrap_or(s.stations);
                s.channels = channels.unwrap_or(s.channels);
                s.dmas = dmas.unwrap_or(s.dmas);
                s.co_density = co_density.unwrap_or(s.co_density);
                if !plant.is_empty() {
                    s.planted = plant
                        .iter()
                        .map(|p| commands::parse_plant(p))
                        .collect::<Result<_>>()?;
                }
            }
            _ => {}
        }
        Ok(c)
    }
}

impl InstanceArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        if self.instance.is_some() {
            c.instance = self.instance.clone();
        }
        if !self.targets.is_empty() {
            c.targets = self.targets.clone();
        }
        if self.no_domain {
            c.use_domain_constraints = false;
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Command::Sat { file } = &cli.command {
        return commands::sat(file, cli.timeout_secs.unwrap_or(0), cli.seed.unwrap_or(0));
    }
    let cfg = cli.experiment().context(InvalidConfig)?;
    cfg.validate().context(InvalidConfig)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    let out = Output::new(&cfg.out, cfg.digest())?;
    match cli.command {
        Command::Gen { .. } => commands::gen(&cfg, &out)?,
        Command::Encode { problem, .. } => commands::encode(&cfg, &problem, &out)?,
        Command::Solve { problem, .. } => commands::solve(&cfg, &problem, &out)?,
        Command::MinClear { .. } => commands::min_clear(&cfg, &out)?,
        Command::MinDmas { .. } => commands::min_dmas(&cfg, &out)?,
        Command::MinDmaIsolated {
            dmas,
            nationwide_min,
            ..
        } => commands::min_dma_isolated(&cfg, &dmas, nationwide_min, &out)?,
        Command::Sample { .. } => commands::sample(&cfg, &out)?,
        Command::Simulate { .. } => commands::simulate(&cfg, &out)?,
        Command::Cliques { .. } => commands::cliques(&cfg, &out)?,
        Command::Stats {
            samples,
            trials,
            min_dmas,
            identity,
            min_mean,
            p_threshold,
            max_r,
            ..
        } => {
            let opts = commands::StatsOptions {
                samples,
                trials,
                min_dmas,
                identity: identity.into(),
                filter: repack_core::analytics::CorrelationFilter {
                    min_mean,
                    p_threshold,
                    max_r,
                },
            };
            commands::stats(&cfg, &opts, &out)?
        }
        Command::Sat { .. } => unreachable!("handled above"),
    }
    Ok(ExitCode::SUCCESS)
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use repack_core::{analytics, clique, driver, instance, montecarlo, participation};
    if err.downcast_ref::<InvalidConfig>().is_some() {
        return "config";
    }
    for cause in err.chain() {
        let kind = if cause.is::<instance::InstanceError>() {
            "instance"
        } else if cause.is::<driver::DriverError>() {
            "driver"
        } else if cause.is::<montecarlo::MonteCarloError>() {
            "monte_carlo"
        } else if cause.is::<participation::ParticipationError>() {
            "participation"
        } else if cause.is::<clique::CliqueError>() {
            "clique"
        } else if cause.is::<analytics::AnalyticsError>() {
            "analytics"
        } else if cause.is::<repack_core::cnf::CnfError>() {
            "cnf"
        } else if cause.is::<std::io::Error>() {
            "io"
        } else {
            continue;
        };
        return kind;
    }
    "error"
}

fn report_error(kind: &str, message: String, causes: Vec<String>) {
    let doc =
        serde_json::json!({ "error": { "kind": kind, "message": message, "causes": causes } });
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", e.kind().to_string(), vec![e.render().to_string()]);
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let causes = e.chain().skip(1).map(|c| c.to_string()).collect();
            report_error(error_kind(&e), e.to_string(), causes);
            ExitCode::FAILURE
        }
    }
}
