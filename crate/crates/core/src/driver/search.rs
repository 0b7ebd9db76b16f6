use serde::Serialize;

use super::{check_feasibility, DriverConfig, DriverError, Feasibility, FeasibilityStatus, Result};
use crate::instance::{ChannelAssignment, Instance, InstanceError, RepackProblem};
use crate::seed::{self, stream};

/// Default allowance over the nationwide minimum when isolating one DMA.
pub const DEFAULT_ISOLATED_SLACK: f64 = 0.05;

/// One solve at a given cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Probe {
    pub cap: usize,
    pub status: FeasibilityStatus,
    pub wall_time_ms: u64,
}

/// Result of a minimum-cap search.
///
/// `minimum` is feasible (with `witness`). When `upper_bound_only` is false,
/// `minimum - 1` was proved infeasible or `minimum` is 0.
#[derive(Debug, Clone, Serialize)]
pub struct MinSearch {
    pub minimum: usize,
    #[serde(skip)]
    pub witness: ChannelAssignment,
    /// Some probe timed out, so a smaller cap may still be feasible.
    pub upper_bound_only: bool,
    /// Status of the probe at `minimum - 1`, if one was run.
    pub below: Option<FeasibilityStatus>,
    /// Probes in the order they ran.
    pub probes: Vec<Probe>,
}

impl MinSearch {
    /// `minimum` feasible and `minimum - 1` proved infeasible (or `minimum == 0`).
    pub fn is_certified(&self) -> bool {
        self.minimum == 0 || self.below == Some(FeasibilityStatus::Infeasible)
    }
}

/// Consecutive timeouts after which the downward scan gives up.
const SCAN_TIMEOUT_LIMIT: usize = 3;

/// Smallest cap in `0..=max` for which `probe` is feasible, assuming
/// feasibility is monotone in the cap. Binary search first; a timeout
/// switches to a downward scan from the smallest certified-feasible cap,
/// which stops at the first proved-infeasible cap or after
/// `SCAN_TIMEOUT_LIMIT` timeouts in a row.
fn search_min_cap(
    max: usize,
    what: &'static str,
    mut probe: impl FnMut(usize) -> Result<Feasibility>,
) -> Result<MinSearch> {
    let mut probes: Vec<Probe> = Vec::new();
    let mut run = |cap: usize, probes: &mut Vec<Probe>| -> Result<Feasibility> {
        let f = probe(cap)?;
        probes.push(Probe {
            cap,
            status: f.status,
            wall_time_ms: f.stats.wall_time_ms,
        });
        Ok(f)
    };

    let top = run(max, &mut probes)?;
    let mut witness = match top.status {
        FeasibilityStatus::Feasible => top.assignment.expect("feasible probe has a witness"),
        FeasibilityStatus::Infeasible => return Err(DriverError::InfeasibleAtMax(what)),
        FeasibilityStatus::TimedOut => return Err(DriverError::TimeoutAtMax { what }),
    };

    // invariant: `hi` feasible, every cap below `lo` proved infeasible
    let (mut lo, mut hi) = (0usize, max);
    let mut timed_out = false;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let f = run(mid, &mut probes)?;
        match f.status {
            FeasibilityStatus::Feasible => {
                hi = mid;
                witness = f.assignment.expect("feasible probe has a witness");
            }
            FeasibilityStatus::Infeasible => lo = mid + 1,
            FeasibilityStatus::TimedOut => {
                timed_out = true;
                break;
            }
        }
    }

    if timed_out {
        let mut streak = 0;
        let mut cap = hi;
        while cap > lo && streak < SCAN_TIMEOUT_LIMIT {
            cap -= 1;
            let f = run(cap, &mut probes)?;
            match f.status {
                FeasibilityStatus::Feasible => {
                    hi = cap;
                    witness = f.assignment.expect("feasible probe has a witness");
                    streak = 0;
                }
                FeasibilityStatus::Infeasible => break,
                FeasibilityStatus::TimedOut => streak += 1,
            }
        }
    }

    let below = hi
        .checked_sub(1)
        .and_then(|b| probes.iter().rev().find(|p| p.cap == b).map(|p| p.status));
    let upper_bound_only = hi > 0 && below != Some(FeasibilityStatus::Infeasible);
    Ok(MinSearch {
        minimum: hi,
        witness,
        upper_bound_only,
        below,
        probes,
    })
}

/// Smallest number of stations that must be cleared nationwide for
/// `target_mhz` to be feasible. Every station is repackable.
pub fn min_nationwide_clearings(
    instance: &Instance,
    target_mhz: u32,
    cfg: &DriverConfig,
    seed: u64,
) -> Result<MinSearch> {
    let base = RepackProblem::new(instance, target_mhz)?.with_domain(cfg.use_domain);
    search_min_cap(instance.len(), "nationwide", |cap| {
        let p = base.clone().with_max_cleared(Some(cap));
        check_feasibility(
            &p,
            &cfg.backend,
            seed::derive(seed, stream::SOLVE, cap as u64),
            cfg.budget,
        )
    })
}

/// Smallest number of DMAs that must contain a cleared station.
pub fn min_dmas_with_clearing(
    instance: &Instance,
    target_mhz: u32,
    cfg: &DriverConfig,
    seed: u64,
) -> Result<MinSearch> {
    let base = RepackProblem::new(instance, target_mhz)?.with_domain(cfg.use_domain);
    let dma_count = instance.dma_members().len();
    search_min_cap(dma_count, "DMA count", |cap| {
        let p = base.clone().with_max_dmas(Some(cap));
        check_feasibility(
            &p,
            &cfg.backend,
            seed::derive(seed, stream::SOLVE, cap as u64),
            cfg.budget,
        )
    })
}

/// Smallest clearing count inside `dma` while the nationwide count stays at
/// most `nationwide_minimum + ceil(slack * nationwide_minimum)`.
///
/// Each DMA is minimized on its own; the per-DMA values are generally not
/// achievable at the same time.
pub fn min_dma_clearings_isolated(
    instance: &Instance,
    target_mhz: u32,
    dma: u32,
    nationwide_minimum: usize,
    slack: f64,
    cfg: &DriverConfig,
    seed: u64,
) -> Result<MinSearch> {
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(
            InstanceError::InvalidParameter(format!("slack {slack} must be non-negative")).into(),
        );
    }
    let nationwide = nationwide_minimum + (slack * nationwide_minimum as f64).ceil() as usize;
    let base = RepackProblem::new(instance, target_mhz)?
        .with_domain(cfg.use_domain)
        .with_max_cleared(Some(nationwide.min(instance.len())))
        .with_dma_cap(dma, 0)?;
    let members = instance.members_of(dma).len();
    search_min_cap(members, "per-DMA", |cap| {
        let p = base
            .clone()
            .with_dma_cap(dma, cap)
            .expect("DMA checked above");
        check_feasibility(
            &p,
            &cfg.backend,
            seed::derive(seed, stream::SOLVE, cap as u64),
            cfg.budget,
        )
    })
}
