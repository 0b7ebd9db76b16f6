//! Repacking instances: stations, channels, constraints and assignments.

mod assignment;
mod channels;
mod io;
mod problem;
pub mod synthetic;

pub use synthetic::{generate_synthetic, PlantedClique, SyntheticInstance, SyntheticParams};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::{validate_assignment, ChannelAssignment, Slot, Violation};
pub use channels::{derive_available_channels, AvailableChannels, ChannelUniverse};
pub use io::{load_instance, write_instance_csv, InstanceDoc, InstanceFormat};
pub use problem::RepackProblem;

/// Index of a station inside its [`Instance`].
pub type StationIdx = usize;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("duplicate station id `{0}`")]
    DuplicateStation(String),
    #[error("unknown station `{station}`{}", row_suffix(*.row))]
    UnknownStation { station: String, row: Option<usize> },
    #[error("station `{station}` references unknown DMA {dma}")]
    UnknownDma { station: String, dma: u32 },
    #[error("channel {channel} is not in the channel universe{}", row_suffix(*.row))]
    UnknownChannel { channel: u32, row: Option<usize> },
    #[error("constraint relates station `{0}` to itself")]
    SelfConstraint(String),
    #[error("instance has no stations")]
    Empty,
    #[error("invalid channel universe: {0}")]
    Universe(String),
    #[error("clearing target {0} MHz is not a positive multiple of 6")]
    TargetNotMultipleOf6(u32),
    #[error("clearing target {target} MHz needs {needed} channels but only {usable} are usable")]
    TargetTooLarge {
        target: u32,
        needed: usize,
        usable: usize,
    },
    #[error("assignment covers {got} stations, instance has {expected}")]
    AssignmentSize { expected: usize, got: usize },
    #[error("malformed {file} row {row}: {message}")]
    Malformed {
        file: String,
        row: usize,
        message: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn row_suffix(row: Option<usize>) -> String {
    row.map(|r| format!(" at row {r}")).unwrap_or_default()
}

pub type Result<T, E = InstanceError> = std::result::Result<T, E>;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Affiliation {
    Abc,
    Cbs,
    Fox,
    Nbc,
    Pbs,
    #[default]
    None,
}

impl Affiliation {
    /// The five network groups, in hidden-variable order.
    pub const NETWORKS: [Affiliation; 5] = [
        Affiliation::Abc,
        Affiliation::Cbs,
        Affiliation::Fox,
        Affiliation::Nbc,
        Affiliation::Pbs,
    ];

    pub fn is_affiliate(self) -> bool {
        self != Affiliation::None
    }

    /// Position in [`Self::NETWORKS`], `None` for non-affiliates.
    pub fn network_index(self) -> Option<usize> {
        Self::NETWORKS.iter().position(|&n| n == self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Affiliation::Abc => "ABC",
            Affiliation::Cbs => "CBS",
            Affiliation::Fox => "FOX",
            Affiliation::Nbc => "NBC",
            Affiliation::Pbs => "PBS",
            Affiliation::None => "NONE",
        }
    }
}

impl fmt::Display for Affiliation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Affiliation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "" | "NONE" => Ok(Affiliation::None),
            "ABC" => Ok(Affiliation::Abc),
            "CBS" => Ok(Affiliation::Cbs),
            "FOX" => Ok(Affiliation::Fox),
            "NBC" => Ok(Affiliation::Nbc),
            "PBS" => Ok(Affiliation::Pbs),
            other => Err(format!("unknown affiliation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub dma: u32,
    #[serde(default)]
    pub affiliation: Affiliation,
    /// Annual revenue; missing values are stored as 0.
    #[serde(default)]
    pub revenue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InterferenceKind {
    /// `A(a) != A(b)`
    Co,
    /// `A(a) != A(b) + 1`
    AdjUp,
    /// `A(a) != A(b) - 1`
    AdjDown,
}

impl InterferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterferenceKind::Co => "CO",
            InterferenceKind::AdjUp => "ADJ_UP",
            InterferenceKind::AdjDown => "ADJ_DOWN",
        }
    }

    /// Whether stations on channels `ch_a` and `ch_b` violate this constraint.
    pub fn conflicts(self, ch_a: u32, ch_b: u32) -> bool {
        match self {
            InterferenceKind::Co => ch_a == ch_b,
            InterferenceKind::AdjUp => ch_a == ch_b + 1,
            InterferenceKind::AdjDown => ch_a + 1 == ch_b,
        }
    }
}

impl FromStr for InterferenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CO" => Ok(InterferenceKind::Co),
            "ADJ_UP" => Ok(InterferenceKind::AdjUp),
            "ADJ_DOWN" => Ok(InterferenceKind::AdjDown),
            other => Err(format!("unknown interference kind `{other}`")),
        }
    }
}

/// An interference constraint between two stations, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interference {
    pub kind: InterferenceKind,
    pub a: StationIdx,
    pub b: StationIdx,
}

/// `A(station) != channel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainConstraint {
    pub station: StationIdx,
    pub channel: u32,
}

/// A validated, immutable repacking instance.
///
/// Constraints are deduplicated and sorted; co-channel pairs are stored with
/// `a < b`. Build one with [`Instance::new`] or [`load_instance`].
#[derive(Debug, Clone)]
pub struct Instance {
    stations: Vec<Station>,
    universe: ChannelUniverse,
    interference: Vec<Interference>,
    domain: Vec<DomainConstraint>,
    dmas: BTreeMap<u32, String>,
    index: HashMap<String, StationIdx>,
    dma_members: BTreeMap<u32, Vec<StationIdx>>,
}

impl Instance {
    /// Validate and canonicalize. Constraints are given by station id.
    pub fn new(
        stations: Vec<Station>,
        universe: ChannelUniverse,
        interference: impl IntoIterator<Item = (InterferenceKind, String, String)>,
        domain: impl IntoIterator<Item = (String, u32)>,
        dmas: BTreeMap<u32, String>,
    ) -> Result<Self> {
        let index = Self::build_index(&stations)?;
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| InstanceError::UnknownStation {
                    station: id.to_string(),
                    row: None,
                })
        };
        let interference = interference
            .into_iter()
            .map(|(kind, a, b)| {
                Ok(Interference {
                    kind,
                    a: lookup(&a)?,
                    b: lookup(&b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let domain = domain
            .into_iter()
            .map(|(s, channel)| {
                Ok(DomainConstraint {
                    station: lookup(&s)?,
                    channel,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_indexed(stations, universe, interference, domain, dmas)
    }

    /// Like [`Instance::new`] with constraints already resolved to indices.
    pub fn from_indexed(
        stations: Vec<Station>,
        universe: ChannelUniverse,
        interference: Vec<Interference>,
        domain: Vec<DomainConstraint>,
        dmas: BTreeMap<u32, String>,
    ) -> Result<Self> {
        if stations.is_empty() {
            return Err(InstanceError::Empty);
        }
        universe.check()?;
        let index = Self::build_index(&stations)?;
        let n = stations.len();

        let mut dma_members: BTreeMap<u32, Vec<StationIdx>> = BTreeMap::new();
        for (i, s) in stations.iter().enumerate() {
            if !dmas.contains_key(&s.dma) {
                return Err(InstanceError::UnknownDma {
                    station: s.id.clone(),
                    dma: s.dma,
                });
            }
            if !(s.revenue.is_finite() && s.revenue >= 0.0) {
                return Err(InstanceError::InvalidParameter(format!(
                    "station `{}` has invalid revenue {}",
                    s.id, s.revenue
                )));
            }
            dma_members.entry(s.dma).or_default().push(i);
        }

        let mut canon = BTreeSet::new();
        for mut c in interference {
            if c.a >= n || c.b >= n {
                return Err(InstanceError::UnknownStation {
                    station: format!("#{}", c.a.max(c.b)),
                    row: None,
                });
            }
            if c.a == c.b {
                return Err(InstanceError::SelfConstraint(stations[c.a].id.clone()));
            }
            if c.kind == InterferenceKind::Co && c.a > c.b {
                std::mem::swap(&mut c.a, &mut c.b);
            }
            canon.insert(c);
        }

        let mut dom = BTreeSet::new();
        for d in domain {
            if d.station >= n {
                return Err(InstanceError::UnknownStation {
                    station: format!("#{}", d.station),
                    row: None,
                });
            }
            if !universe.contains(d.channel) {
                return Err(InstanceError::UnknownChannel {
                    channel: d.channel,
                    row: None,
                });
            }
            dom.insert(d);
        }

        Ok(Instance {
            stations,
            universe,
            interference: canon.into_iter().collect(),
            domain: dom.into_iter().collect(),
            dmas,
            index,
            dma_members,
        })
    }

    fn build_index(stations: &[Station]) -> Result<HashMap<String, StationIdx>> {
        let mut index = HashMap::with_capacity(stations.len());
        for (i, s) in stations.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(InstanceError::DuplicateStation(s.id.clone()));
            }
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station(&self, idx: StationIdx) -> &Station {
        &self.stations[idx]
    }

    pub fn station_index(&self, id: &str) -> Option<StationIdx> {
        self.index.get(id).copied()
    }

    pub fn universe(&self) -> &ChannelUniverse {
        &self.universe
    }

    pub fn interference(&self) -> &[Interference] {
        &self.interference
    }

    pub fn domain(&self) -> &[DomainConstraint] {
        &self.domain
    }

    pub fn dmas(&self) -> &BTreeMap<u32, String> {
        &self.dmas
    }

    pub fn dma_name(&self, dma: u32) -> &str {
        self.dmas.get(&dma).map(String::as_str).unwrap_or("")
    }

    /// Stations of each DMA that has at least one station.
    pub fn dma_members(&self) -> &BTreeMap<u32, Vec<StationIdx>> {
        &self.dma_members
    }

    pub fn members_of(&self, dma: u32) -> &[StationIdx] {
        self.dma_members.get(&dma).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Co-channel neighbour lists, sorted.
    pub fn co_adjacency(&self) -> Vec<Vec<StationIdx>> {
        let mut adj = vec![Vec::new(); self.len()];
        for c in self
            .interference
            .iter()
            .filter(|c| c.kind == InterferenceKind::Co)
        {
            adj[c.a].push(c.b);
            adj[c.b].push(c.a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}
