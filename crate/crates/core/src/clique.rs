//! Co-channel clique catalogs and the blocking-clique infeasibility test.
//!
//! `c + 1` non-participating stations that pairwise share a CO constraint
//! cannot all fit on `c` channels, so such a clique certifies infeasibility
//! without a SAT call.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, StationIdx};
use crate::participation::ParticipationVector;
use crate::seed::{self, stream};

#[derive(Debug, Error)]
pub enum CliqueError {
    #[error("stations `{0}` and `{1}` are listed in one clique but share no CO constraint")]
    NotAClique(String, String),
    #[error("unknown station `{0}` in clique file")]
    UnknownStation(String),
    #[error("malformed clique file line {line}: {message}")]
    File { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Search effort for [`enumerate_cliques_greedy`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliqueEffort {
    /// Cliques smaller than this are dropped.
    pub min_size: usize,
    /// Greedy growths started from each seed vertex.
    pub attempts_per_vertex: usize,
    /// Only the highest-degree vertices seed growths; `None` uses all.
    pub max_seed_vertices: Option<usize>,
}

impl Default for CliqueEffort {
    fn default() -> Self {
        CliqueEffort {
            min_size: 3,
            attempts_per_vertex: 8,
            max_seed_vertices: None,
        }
    }
}

/// Undirected co-channel graph with sorted adjacency lists.
#[derive(Debug, Clone)]
pub struct CoGraph {
    adj: Vec<Vec<StationIdx>>,
}

impl CoGraph {
    pub fn new(instance: &Instance) -> Self {
        let mut adj = instance.co_adjacency();
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        CoGraph { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn degree(&self, v: StationIdx) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: StationIdx) -> &[StationIdx] {
        &self.adj[v]
    }

    pub fn adjacent(&self, a: StationIdx, b: StationIdx) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn is_clique(&self, vs: &[StationIdx]) -> bool {
        vs.iter()
            .enumerate()
            .all(|(x, &a)| vs[x + 1..].iter().all(|&b| self.adjacent(a, b)))
    }
}

/// Verified co-channel cliques, each sorted, largest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueCatalog {
    cliques: Vec<Vec<StationIdx>>,
    pub min_size: usize,
    pub seed: u64,
    pub effort: CliqueEffort,
}

impl CliqueCatalog {
    /// Check every set pairwise against the CO graph, then sort and deduplicate.
    pub fn new(
        instance: &Instance,
        cliques: impl IntoIterator<Item = Vec<StationIdx>>,
        seed: u64,
        effort: CliqueEffort,
    ) -> Result<Self, CliqueError> {
        let graph = CoGraph::new(instance);
        let mut set = BTreeSet::new();
        for mut c in cliques {
            c.sort_unstable();
            c.dedup();
            for (x, &a) in c.iter().enumerate() {
                if let Some(&b) = c[x + 1..].iter().find(|&&b| !graph.adjacent(a, b)) {
                    return Err(CliqueError::NotAClique(
                        instance.station(a).id.clone(),
                        instance.station(b).id.clone(),
                    ));
                }
            }
            if c.len() >= effort.min_size {
                set.insert(c);
            }
        }
        let mut cliques: Vec<_> = set.into_iter().collect();
        cliques.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Ok(CliqueCatalog {
            cliques,
            min_size: effort.min_size,
            seed,
            effort,
        })
    }

    pub fn cliques(&self) -> &[Vec<StationIdx>] {
        &self.cliques
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn largest(&self) -> usize {
        self.cliques.first().map_or(0, Vec::len)
    }

    pub fn write_jsonl<W: Write>(
        &self,
        instance: &Instance,
        mut out: W,
    ) -> Result<(), CliqueError> {
        let meta = Record::Meta {
            instance_digest: instance.digest(),
            seed: self.seed,
            effort: self.effort.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&meta).expect("serializes"))?;
        for c in &self.cliques {
            let rec = Record::Clique {
                stations: c.iter().map(|&i| instance.station(i).id.clone()).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&rec).expect("serializes"))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Load a catalog, re-verifying each clique against `instance`. Records
    /// of unknown kinds are skipped.
    pub fn read_jsonl<R: BufRead>(instance: &Instance, input: R) -> Result<Self, CliqueError> {
        let mut seed = 0;
        let mut effort = CliqueEffort::default();
        let mut cliques = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| CliqueError::File {
                line: n + 1,
                message: e.to_string(),
            })?;
            match rec {
                Record::Meta {
                    seed: s, effort: e, ..
                } => {
                    seed = s;
                    effort = e;
                }
                Record::Clique { stations } => {
                    let idx = stations
                        .iter()
                        .map(|id| {
                            instance
                                .station_index(id)
                                .ok_or_else(|| CliqueError::UnknownStation(id.clone()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    cliques.push(idx);
                }
                Record::Other => {}
            }
        }
        CliqueCatalog::new(instance, cliques, seed, effort)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Meta {
        instance_digest: String,
        seed: u64,
        effort: CliqueEffort,
    },
    Clique {
        stations: Vec<String>,
    },
    #[serde(other)]
    Other,
}

/// Randomized greedy clique growth from seed vertices in descending-degree
/// order. The first attempt per vertex always takes the candidate with the
/// most neighbours among the remaining candidates; later attempts pick a
/// uniformly random candidate half of the time. Deterministic for a seed.
pub fn enumerate_cliques_greedy(
    instance: &Instance,
    effort: &CliqueEffort,
    seed: u64,
) -> CliqueCatalog {
    let graph = CoGraph::new(instance);
    let mut order: Vec<StationIdx> = (0..graph.len()).filter(|&v| graph.degree(v) > 0).collect();
    order.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));
    if let Some(m) = effort.max_seed_vertices {
        order.truncate(m);
    }
    let attempts = effort.attempts_per_vertex.max(1);
    let found: Vec<Vec<StationIdx>> = order
        .par_iter()
        .flat_map_iter(|&v| {
            let graph = &graph;
            (0..attempts).map(move |a| {
                let mut rng = crate::seed::rng(seed::derive(
                    seed,
                    stream::CLIQUE,
                    (v * attempts + a) as u64,
                ));
                grow(graph, v, a > 0, &mut rng)
            })
        })
        .collect();
    CliqueCatalog::new(instance, found, seed, effort.clone())
        .expect("greedy growth only adds common neighbours")
}

fn grow(
    graph: &CoGraph,
    start: StationIdx,
    randomize: bool,
    rng: &mut impl Rng,
) -> Vec<StationIdx> {
    let mut clique = vec![start];
    let mut candidates: Vec<StationIdx> = graph.neighbors(start).to_vec();
    while !candidates.is_empty() {
        let pick = if randomize && rng.gen_bool(0.5) {
            candidates[rng.gen_range(0..candidates.len())]
        } else {
            let score =
                |u: StationIdx| candidates.iter().filter(|&&w| graph.adjacent(u, w)).count();
            let best = candidates
                .iter()
                .map(|&u| score(u))
                .max()
                .expect("non-empty");
            let ties: Vec<StationIdx> = candidates
                .iter()
                .copied()
                .filter(|&u| score(u) == best)
                .collect();
            ties[rng.gen_range(0..ties.len())]
        };
        clique.push(pick);
        candidates.retain(|&w| w != pick && graph.adjacent(pick, w));
    }
    clique.sort_unstable();
    clique
}

/// Outcome of [`blocking_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Blocking {
    /// No blocking clique found; feasibility still needs a SAT check.
    Unknown,
    /// Each set has at least `c + 1` non-participants; `z` is the size of
    /// their union.
    Blocked {
        z: usize,
        sets: Vec<Vec<StationIdx>>,
    },
}

impl Blocking {
    pub fn is_blocked(&self) -> bool {
        matches!(self, Blocking::Blocked { .. })
    }

    pub fn z(&self) -> Option<usize> {
        match self {
            Blocking::Blocked { z, .. } => Some(*z),
            Blocking::Unknown => None,
        }
    }
}

/// Intersect every catalog clique with the non-participants and keep those
/// intersections with at least `c + 1` members.
pub fn blocking_check(catalog: &CliqueCatalog, x: &ParticipationVector, c: usize) -> Blocking {
    let sets: Vec<Vec<StationIdx>> = catalog
        .cliques()
        .iter()
        .map(|clique| {
            clique
                .iter()
                .copied()
                .filter(|&i| x.get(i))
                .collect::<Vec<_>>()
        })
        .filter(|b| b.len() > c)
        .collect();
    if sets.is_empty() {
        return Blocking::Unknown;
    }
    let union: BTreeSet<StationIdx> = sets.iter().flatten().copied().collect();
    Blocking::Blocked {
        z: union.len(),
        sets,
    }
}

/// Share of infeasible trials that contained a blocking clique.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Attribution {
    pub infeasible: usize,
    pub blocked: usize,
    /// `None` when no trial was infeasible.
    pub fraction: Option<f64>,
}

/// `trials` yields `(infeasible, blocked)` per trial.
pub fn attribution_fraction(trials: impl IntoIterator<Item = (bool, bool)>) -> Attribution {
    let (mut infeasible, mut blocked) = (0, 0);
    for (inf, blk) in trials {
        if inf {
            infeasible += 1;
            blocked += usize::from(blk);
        }
    }
    let fraction = (infeasible > 0).then(|| blocked as f64 / infeasible as f64);
    Attribution {
        infeasible,
        blocked,
        fraction,
    }
}
