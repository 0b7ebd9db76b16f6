//! Monte Carlo estimation of the probability that a clearing target is
//! feasible under a participation model.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clique::{attribution_fraction, blocking_check, Attribution, CliqueCatalog};
use crate::driver::{check_feasibility, DriverConfig, DriverError, FeasibilityStatus};
use crate::instance::{Instance, InstanceError, RepackProblem};
use crate::participation::{sample_with, ModelSpec, ParticipationError, SharedDraws};
use crate::seed::{self, stream};

/// Default number of trials per estimate.
pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Participation(#[from] ParticipationError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MonteCarloError> = std::result::Result<T, E>;

/// How each trial is decided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialBackend {
    /// Always solve. Blocking cliques are still recorded when a catalog is given.
    #[default]
    Sat,
    /// A blocking clique decides infeasible without solving; otherwise solve.
    CliqueThenSat,
    /// Blocked trials are infeasible, all others are counted feasible.
    CliqueOnly,
}

impl TrialBackend {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialBackend::Sat => "sat",
            TrialBackend::CliqueThenSat => "clique-then-sat",
            TrialBackend::CliqueOnly => "clique-only",
        }
    }
}

impl fmt::Display for TrialBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrialBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sat" => Ok(TrialBackend::Sat),
            "clique-then-sat" => Ok(TrialBackend::CliqueThenSat),
            "clique-only" => Ok(TrialBackend::CliqueOnly),
            other => Err(format!(
                "unknown backend `{other}` (expected sat, clique-then-sat or clique-only)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialVerdict {
    Feasible,
    Infeasible,
    /// Solver budget exhausted; counted as infeasible.
    TimeoutInfeasible,
}

impl TrialVerdict {
    pub fn is_infeasible(self) -> bool {
        self != TrialVerdict::Feasible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecidedBy {
    Sat,
    Clique,
    /// Clique-only backend with no blocking clique.
    Assumed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingInfo {
    pub z: usize,
    pub cliques: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub draw_digest: String,
    pub non_participants: usize,
    pub verdict: TrialVerdict,
    pub decided_by: DecidedBy,
    /// Present exactly when a blocking clique was found.
    pub blocking: Option<BlockingInfo>,
    pub wall_time_ms: u64,
}

/// Everything a trial run needs besides the instance and the seed.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub model: ModelSpec,
    pub target_mhz: u32,
    pub trials: usize,
    pub backend: TrialBackend,
    pub driver: DriverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub params: String,
    pub target: u32,
    pub trials: usize,
    pub p: f64,
    /// Binomial standard error of `p`.
    pub stderr: f64,
    pub infeasible: usize,
    pub timeouts: usize,
    /// Success probability over trials that did not time out.
    pub p_excluding_timeouts: Option<f64>,
    pub mean_z: Option<f64>,
    pub attribution: Attribution,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub summary: Summary,
    pub reports: Vec<TrialReport>,
}

/// Average union size over infeasible trials that had a blocking clique.
pub fn mean_z(reports: &[TrialReport]) -> Option<f64> {
    let zs: Vec<usize> = reports
        .iter()
        .filter(|r| r.verdict.is_infeasible())
        .filter_map(|r| r.blocking.map(|b| b.z))
        .collect();
    (!zs.is_empty()).then(|| zs.iter().sum::<usize>() as f64 / zs.len() as f64)
}

pub fn summarize(config: &TrialConfig, reports: &[TrialReport]) -> Summary {
    let t = reports.len();
    let infeasible = reports.iter().filter(|r| r.verdict.is_infeasible()).count();
    let timeouts = reports
        .iter()
        .filter(|r| r.verdict == TrialVerdict::TimeoutInfeasible)
        .count();
    let p = if t == 0 {
        0.0
    } else {
        1.0 - infeasible as f64 / t as f64
    };
    let stderr = if t == 0 {
        0.0
    } else {
        (p * (1.0 - p) / t as f64).sqrt()
    };
    let decided = t - timeouts;
    let p_excluding_timeouts = (decided > 0).then(|| (t - infeasible) as f64 / decided as f64);
    Summary {
        model: config.model.name().to_string(),
        params: config.model.params(),
        target: config.target_mhz,
        trials: t,
        p,
        stderr,
        infeasible,
        timeouts,
        p_excluding_timeouts,
        mean_z: mean_z(reports),
        attribution: attribution_fraction(
            reports
                .iter()
                .map(|r| (r.verdict.is_infeasible(), r.blocking.is_some())),
        ),
    }
}

fn trial_seed(master: u64, trial: usize) -> u64 {
    seed::derive(master, stream::TRIAL, trial as u64)
}

fn check_config(config: &TrialConfig, catalog: Option<&CliqueCatalog>) -> Result<()> {
    config.model.validate()?;
    if config.trials == 0 {
        return Err(MonteCarloError::Config(
            "at least one trial is required".into(),
        ));
    }
    if config.backend != TrialBackend::Sat && catalog.is_none() {
        return Err(MonteCarloError::Config(format!(
            "backend {} needs a clique catalog",
            config.backend
        )));
    }
    Ok(())
}

fn run_trial(
    instance: &Instance,
    config: &TrialConfig,
    catalog: Option<&CliqueCatalog>,
    base: &RepackProblem<'_>,
    trial: usize,
    seed: u64,
    draws: &SharedDraws,
) -> Result<TrialReport> {
    let start = Instant::now();
    let x = sample_with(&config.model, instance, draws)?;
    let c = base.available.count();
    let blocking = catalog
        .map(|cat| blocking_check(cat, &x, c))
        .and_then(|b| match b {
            crate::clique::Blocking::Blocked { z, sets } => Some(BlockingInfo {
                z,
                cliques: sets.len(),
            }),
            crate::clique::Blocking::Unknown => None,
        });

    let (verdict, decided_by) = match (config.backend, blocking) {
        (TrialBackend::CliqueThenSat | TrialBackend::CliqueOnly, Some(_)) => {
            (TrialVerdict::Infeasible, DecidedBy::Clique)
        }
        (TrialBackend::CliqueOnly, None) => (TrialVerdict::Feasible, DecidedBy::Assumed),
        _ => {
            let problem = base.clone().with_must_repack(x.non_participants())?;
            let solve_seed = seed::derive(seed, stream::SOLVE, 0);
            let f = check_feasibility(
                &problem,
                &config.driver.backend,
                solve_seed,
                config.driver.budget,
            )?;
            let verdict = match f.status {
                FeasibilityStatus::Feasible => TrialVerdict::Feasible,
                FeasibilityStatus::Infeasible => TrialVerdict::Infeasible,
                FeasibilityStatus::TimedOut => TrialVerdict::TimeoutInfeasible,
            };
            (verdict, DecidedBy::Sat)
        }
    };
    Ok(TrialReport {
        trial,
        seed,
        draw_digest: x.digest(),
        non_participants: x.count(),
        verdict,
        decided_by,
        blocking,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

fn draws_for(instance: &Instance, master: u64, trials: usize) -> Vec<(u64, SharedDraws)> {
    (0..trials)
        .map(|t| {
            let s = trial_seed(master, t);
            (
                s,
                SharedDraws::draw(instance.len(), seed::derive(s, stream::PARTICIPATION, 0)),
            )
        })
        .collect()
}

fn run_trials(
    instance: &Instance,
    config: &TrialConfig,
    catalog: Option<&CliqueCatalog>,
    draws: &[(u64, SharedDraws)],
) -> Result<Estimate> {
    check_config(config, catalog)?;
    let base =
        RepackProblem::new(instance, config.target_mhz)?.with_domain(config.driver.use_domain);
    let reports: Vec<TrialReport> = draws
        .par_iter()
        .enumerate()
        .map(|(t, (s, d))| run_trial(instance, config, catalog, &base, t, *s, d))
        .collect::<Result<_>>()?;
    Ok(Estimate {
        summary: summarize(config, &reports),
        reports,
    })
}

/// Run `config.trials` independent trials. Each trial draws a participation
/// vector, forces its non-participants onto channels and decides
/// feasibility; `p = 1 - infeasible / T`.
pub fn estimate_success(
    instance: &Instance,
    config: &TrialConfig,
    catalog: Option<&CliqueCatalog>,
    seed: u64,
) -> Result<Estimate> {
    let draws = draws_for(instance, seed, config.trials);
    run_trials(instance, config, catalog, &draws)
}

/// Estimate at each `alpha` with the same uniform variates per trial, so the
/// non-participant set of a trial only grows along the sweep. Trial `t` at a
/// given alpha matches trial `t` of [`estimate_success`] with the same seed.
pub fn shared_randomness_sweep(
    instance: &Instance,
    config: &TrialConfig,
    alphas: &[f64],
    catalog: Option<&CliqueCatalog>,
    seed: u64,
) -> Result<Vec<(f64, Estimate)>> {
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MonteCarloError::Config(
            "alpha list must be strictly increasing".into(),
        ));
    }
    let draws = draws_for(instance, seed, config.trials);
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = TrialConfig {
                model: config.model.with_alpha(alpha)?,
                ..config.clone()
            };
            Ok((alpha, run_trials(instance, &cfg, catalog, &draws)?))
        })
        .collect()
}

/// Summary table: model, params, target, T, p, stderr, mean_z, attribution_fraction.
pub fn write_summary_csv<W: Write>(summaries: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "params",
        "target",
        "T",
        "p",
        "stderr",
        "mean_z",
        "attribution_fraction",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in summaries {
        w.write_record([
            s.model.clone(),
            s.params.clone(),
            s.target.to_string(),
            s.trials.to_string(),
            s.p.to_string(),
            s.stderr.to_string(),
            opt(s.mean_z),
            opt(s.attribution.fraction),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
