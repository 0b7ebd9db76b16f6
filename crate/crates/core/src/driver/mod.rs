//! Feasibility checks, minimum-clearing searches and solution sampling.
//!
//! A solve that exhausts its time budget is treated as infeasible, but the
//! outcome keeps the distinction so callers can report it separately.

mod sample;
mod search;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{decode, encode, CnfError};
use crate::instance::{
    validate_assignment, ChannelAssignment, InstanceError, RepackProblem, Violation,
};
use crate::sat::{
    self, ExternalSolver, ExternalSolverError, SolveStats, SolverOptions, Verdict,
    DEFAULT_TIME_BUDGET,
};

pub use sample::{
    sample_solutions, Sample, SampleHeader, SampleRequest, SampleSet, DEFAULT_BUFFER,
};
pub use search::{
    min_dma_clearings_isolated, min_dmas_with_clearing, min_nationwide_clearings, MinSearch, Probe,
    DEFAULT_ISOLATED_SLACK,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    External(#[from] ExternalSolverError),
    #[error("decoded assignment fails validation: {0:?}")]
    InvalidWitness(Vec<Violation>),
    #[error("infeasible even with every cap fully relaxed ({0}); the target is too high for this universe")]
    InfeasibleAtMax(&'static str),
    #[error("{what} probe timed out with the cap fully relaxed")]
    TimeoutAtMax { what: &'static str },
    #[error("produced {produced} of {requested} samples within the retry budget")]
    SampleShortfall { requested: usize, produced: usize },
    #[error("malformed sample file line {line}: {message}")]
    SampleFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DriverError> = std::result::Result<T, E>;

/// Which solver decides the encoded formulas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum SolverBackend {
    #[default]
    Embedded,
    External(ExternalSolver),
}

/// Solver settings shared by every probe of a run.
#[derive(Debug, Clone)]
pub struct DriverConfig {
    pub backend: SolverBackend,
    /// Per-solve budget. `None` runs each solve to completion.
    pub budget: Option<Duration>,
    pub use_domain: bool,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            backend: SolverBackend::Embedded,
            budget: Some(DEFAULT_TIME_BUDGET),
            use_domain: true,
        }
    }
}

impl DriverConfig {
    pub fn with_budget(mut self, budget: Option<Duration>) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_domain(mut self, on: bool) -> Self {
        self.use_domain = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    /// Budget exhausted; counted as infeasible.
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub status: FeasibilityStatus,
    /// Validator-clean witness when feasible.
    pub assignment: Option<ChannelAssignment>,
    pub stats: SolveStats,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }

    pub fn timed_out(&self) -> bool {
        self.status == FeasibilityStatus::TimedOut
    }
}

/// Encode, solve, decode and validate one problem.
pub fn check_feasibility(
    problem: &RepackProblem<'_>,
    backend: &SolverBackend,
    seed: u64,
    budget: Option<Duration>,
) -> Result<Feasibility> {
    let formula = encode(problem);
    let outcome = match backend {
        SolverBackend::Embedded => {
            sat::solve(&formula, &SolverOptions::seeded(seed).with_budget(budget))
        }
        SolverBackend::External(ext) => ext.solve(&formula, budget)?,
    };
    let (status, assignment) = match outcome.verdict {
        Verdict::Sat(model) => {
            let assignment = decode(problem, &formula, &model)?;
            let violations = validate_assignment(problem, &assignment)?;
            if !violations.is_empty() {
                return Err(DriverError::InvalidWitness(violations));
            }
            (FeasibilityStatus::Feasible, Some(assignment))
        }
        Verdict::Unsat => (FeasibilityStatus::Infeasible, None),
        Verdict::Timeout => (FeasibilityStatus::TimedOut, None),
    };
    log::debug!(
        "feasibility {:?} in {} ms",
        status,
        outcome.stats.wall_time_ms
    );
    Ok(Feasibility {
        status,
        assignment,
        stats: outcome.stats,
    })
}
