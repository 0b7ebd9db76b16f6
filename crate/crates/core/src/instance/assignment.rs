use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Instance, InstanceError, InterferenceKind, RepackProblem, Result, StationIdx};

/// Where a station ends up: on a channel, or cleared off the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Cleared,
    Channel(u32),
}

impl Slot {
    pub fn channel(self) -> Option<u32> {
        match self {
            Slot::Channel(c) => Some(c),
            Slot::Cleared => None,
        }
    }

    pub fn is_cleared(self) -> bool {
        self == Slot::Cleared
    }
}

impl Serialize for Slot {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Slot::Channel(c) => s.serialize_u32(*c),
            Slot::Cleared => s.serialize_str("CLEARED"),
        }
    }
}

impl<'de> Deserialize<'de> for Slot {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => Ok(Slot::Channel(c)),
            Raw::Text(t) if t == "CLEARED" => Ok(Slot::Cleared),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected channel or CLEARED, got `{t}`"
            ))),
        }
    }
}

/// A decoded witness: one [`Slot`] per station, in instance order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelAssignment {
    slots: Vec<Slot>,
}

impl ChannelAssignment {
    pub fn new(slots: Vec<Slot>) -> Self {
        ChannelAssignment { slots }
    }

    pub fn all_cleared(n: usize) -> Self {
        ChannelAssignment {
            slots: vec![Slot::Cleared; n],
        }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn get(&self, station: StationIdx) -> Slot {
        self.slots[station]
    }

    pub fn set(&mut self, station: StationIdx, slot: Slot) {
        self.slots[station] = slot;
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Sorted indices of cleared stations.
    pub fn cleared(&self) -> Vec<StationIdx> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_cleared())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cleared_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_cleared()).count()
    }

    /// Keyed by station id, for persistence.
    pub fn to_named(&self, instance: &Instance) -> BTreeMap<String, Slot> {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, s)| (instance.station(i).id.clone(), *s))
            .collect()
    }

    /// Inverse of [`Self::to_named`]; must cover every station exactly.
    pub fn from_named(instance: &Instance, named: &BTreeMap<String, Slot>) -> Result<Self> {
        let mut slots = vec![None; instance.len()];
        for (id, slot) in named {
            let idx = instance
                .station_index(id)
                .ok_or_else(|| InstanceError::UnknownStation {
                    station: id.clone(),
                    row: None,
                })?;
            slots[idx] = Some(*slot);
        }
        if slots.iter().any(Option::is_none) {
            return Err(InstanceError::AssignmentSize {
                expected: instance.len(),
                got: named.len(),
            });
        }
        Ok(ChannelAssignment {
            slots: slots.into_iter().map(Option::unwrap).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    MustRepackCleared {
        station: String,
    },
    ChannelUnavailable {
        station: String,
        channel: u32,
    },
    ForbiddenChannel {
        station: String,
        channel: u32,
    },
    DomainExcluded {
        station: String,
        channel: u32,
    },
    Interference {
        kind: InterferenceKind,
        a: String,
        b: String,
        channel_a: u32,
        channel_b: u32,
    },
    NationwideCap {
        cleared: usize,
        cap: usize,
    },
    DmaCap {
        dma: u32,
        cleared: usize,
        cap: usize,
    },
    DmaCountCap {
        dmas: usize,
        cap: usize,
    },
}

/// Every way `assignment` breaks `problem`. Empty means feasible.
pub fn validate_assignment(
    problem: &RepackProblem<'_>,
    assignment: &ChannelAssignment,
) -> Result<Vec<Violation>> {
    let inst = problem.instance;
    if assignment.len() != inst.len() {
        return Err(InstanceError::AssignmentSize {
            expected: inst.len(),
            got: assignment.len(),
        });
    }
    let id = |i: StationIdx| inst.station(i).id.clone();
    let mut out = Vec::new();

    for (i, slot) in assignment.slots().iter().enumerate() {
        match *slot {
            Slot::Cleared => {
                if problem.is_must_repack(i) {
                    out.push(Violation::MustRepackCleared { station: id(i) });
                }
            }
            Slot::Channel(ch) => {
                if !problem.available.contains(ch) {
                    out.push(Violation::ChannelUnavailable {
                        station: id(i),
                        channel: ch,
                    });
                } else if problem.available.forbidden.contains(&ch) {
                    out.push(Violation::ForbiddenChannel {
                        station: id(i),
                        channel: ch,
                    });
                } else if problem.channel_excluded(i, ch) {
                    out.push(Violation::DomainExcluded {
                        station: id(i),
                        channel: ch,
                    });
                }
            }
        }
    }

    for c in inst.interference() {
        if let (Slot::Channel(ca), Slot::Channel(cb)) = (assignment.get(c.a), assignment.get(c.b)) {
            if c.kind.conflicts(ca, cb) {
                out.push(Violation::Interference {
                    kind: c.kind,
                    a: id(c.a),
                    b: id(c.b),
                    channel_a: ca,
                    channel_b: cb,
                });
            }
        }
    }

    let cleared = assignment.cleared_count();
    if let Some(cap) = problem.max_cleared_nationwide {
        if cleared > cap {
            out.push(Violation::NationwideCap { cleared, cap });
        }
    }
    for (&dma, &cap) in &problem.dma_caps {
        let n = inst
            .members_of(dma)
            .iter()
            .filter(|&&i| assignment.get(i).is_cleared())
            .count();
        if n > cap {
            out.push(Violation::DmaCap {
                dma,
                cleared: n,
                cap,
            });
        }
    }
    if let Some(cap) = problem.max_dmas_with_clearing {
        let dmas: BTreeSet<u32> = assignment
            .cleared()
            .into_iter()
            .map(|i| inst.station(i).dma)
            .collect();
        if dmas.len() > cap {
            out.push(Violation::DmaCountCap {
                dmas: dmas.len(),
                cap,
            });
        }
    }
    Ok(out)
}
