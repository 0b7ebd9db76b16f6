use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_feasibility, search::min_nationwide_clearings, DriverConfig, DriverError, Result,
};
use crate::instance::{ChannelAssignment, Instance, RepackProblem, Slot};
use crate::sat::SolveStats;
use crate::seed::{self, stream};

/// Default number of extra clearings allowed over the nationwide minimum.
pub const DEFAULT_BUFFER: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRequest {
    pub count: usize,
    pub buffer: usize,
    /// Extra attempts per sample after a timeout, each with a fresh seed.
    pub max_retries: usize,
    /// Known nationwide minimum; computed first when absent.
    pub minimum: Option<usize>,
}

impl Default for SampleRequest {
    fn default() -> Self {
        SampleRequest {
            count: 1,
            buffer: DEFAULT_BUFFER,
            max_retries: 5,
            minimum: None,
        }
    }
}

/// Configuration shared by every sample of a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub instance_digest: String,
    pub target_mhz: u32,
    pub use_domain: bool,
    pub minimum: usize,
    pub buffer: usize,
    /// Nationwide cap used for every solve: `minimum + buffer`.
    pub cap: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub index: usize,
    pub seed: u64,
    pub stats: SolveStats,
    pub assignment: ChannelAssignment,
}

/// Sampled solutions in index order. Duplicates are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub header: SampleHeader,
    pub samples: Vec<Sample>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(SampleHeader),
    Sample {
        index: usize,
        seed: u64,
        stats: SolveStats,
        assignment: BTreeMap<String, Slot>,
    },
    /// Records of other kinds, such as provenance lines, are skipped.
    #[serde(other)]
    Other,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn assignments(&self) -> impl Iterator<Item = &ChannelAssignment> {
        self.samples.iter().map(|s| &s.assignment)
    }

    /// JSON-lines: a header record, then one record per sample with the
    /// assignment keyed by station id.
    pub fn write_jsonl<W: Write>(&self, instance: &Instance, mut out: W) -> Result<()> {
        let line = |r: &Record| serde_json::to_string(r).expect("records serialize");
        writeln!(out, "{}", line(&Record::Header(self.header.clone())))?;
        for s in &self.samples {
            let rec = Record::Sample {
                index: s.index,
                seed: s.seed,
                stats: s.stats.clone(),
                assignment: s.assignment.to_named(instance),
            };
            writeln!(out, "{}", line(&rec))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a file written by [`SampleSet::write_jsonl`] for the same instance.
    /// Lines whose `record` tag is neither `header` nor `sample` are ignored.
    pub fn read_jsonl<R: BufRead>(instance: &Instance, input: R) -> Result<Self> {
        let bad = |line: usize, message: String| DriverError::SampleFile { line, message };
        let mut header = None;
        let mut samples = Vec::new();
        for (n, raw) in input.lines().enumerate() {
            let raw = raw?;
            if raw.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&raw).map_err(|e| bad(n + 1, e.to_string()))? {
                Record::Header(h) => {
                    if header.is_some() {
                        return Err(bad(n + 1, "second header record".into()));
                    }
                    if h.instance_digest != instance.digest() {
                        return Err(bad(
                            n + 1,
                            "sample set was produced for a different instance".into(),
                        ));
                    }
                    header = Some(h);
                }
                Record::Sample {
                    index,
                    seed,
                    stats,
                    assignment,
                } => {
                    if header.is_none() {
                        return Err(bad(n + 1, "sample before header".into()));
                    }
                    let assignment = ChannelAssignment::from_named(instance, &assignment)
                        .map_err(|e| bad(n + 1, e.to_string()))?;
                    samples.push(Sample {
                        index,
                        seed,
                        stats,
                        assignment,
                    });
                }
                Record::Other => {}
            }
        }
        let header = header.ok_or_else(|| bad(0, "missing header record".into()))?;
        Ok(SampleSet { header, samples })
    }
}

/// Solve `count` times with the nationwide cap at `minimum + buffer`, each
/// with its own derived seed. A timed-out attempt is retried with a fresh
/// seed up to `max_retries` times.
pub fn sample_solutions(
    instance: &Instance,
    target_mhz: u32,
    cfg: &DriverConfig,
    request: &SampleRequest,
    seed: u64,
) -> Result<SampleSet> {
    let minimum = match request.minimum {
        Some(m) => m,
        None => min_nationwide_clearings(instance, target_mhz, cfg, seed)?.minimum,
    };
    let cap = (minimum + request.buffer).min(instance.len());
    let problem = RepackProblem::new(instance, target_mhz)?
        .with_domain(cfg.use_domain)
        .with_max_cleared(Some(cap));

    let results: Vec<Option<Sample>> = (0..request.count)
        .into_par_iter()
        .map(|index| {
            let first = seed::derive(seed, stream::SAMPLE, index as u64);
            for attempt in 0..=request.max_retries {
                let s = if attempt == 0 {
                    first
                } else {
                    seed::derive(first, stream::SAMPLE, attempt as u64)
                };
                let f = check_feasibility(&problem, &cfg.backend, s, cfg.budget)?;
                if let Some(assignment) = f.assignment {
                    return Ok(Some(Sample {
                        index,
                        seed: s,
                        stats: f.stats,
                        assignment,
                    }));
                }
                if !f.timed_out() {
                    // proved infeasible: retrying cannot help
                    break;
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;

    let samples: Vec<Sample> = results.into_iter().flatten().collect();
    if samples.len() < request.count {
        return Err(DriverError::SampleShortfall {
            requested: request.count,
            produced: samples.len(),
        });
    }
    Ok(SampleSet {
        header: SampleHeader {
            instance_digest: instance.digest(),
            target_mhz,
            use_domain: cfg.use_domain,
            minimum,
            buffer: request.buffer,
            cap,
            master_seed: seed,
        },
        samples,
    })
}
