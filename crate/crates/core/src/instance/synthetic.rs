//! Seeded synthetic instances for desk-scale experiments.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    Affiliation, ChannelUniverse, DomainConstraint, Instance, InstanceError, Interference,
    InterferenceKind, Result, Station, StationIdx,
};

/// A co-channel clique to plant, optionally pinned to one DMA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedClique {
    pub size: usize,
    #[serde(default)]
    pub dma: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub stations: usize,
    /// Universe size; channels are numbered from `first_channel`.
    pub channels: usize,
    pub first_channel: u32,
    pub forbidden: Vec<u32>,
    pub dmas: usize,
    /// Probability of a CO edge between two stations of the same DMA.
    pub co_density: f64,
    /// Probability of a CO edge between stations of different DMAs.
    pub cross_dma_co_density: f64,
    /// Probability of each ADJ_UP / ADJ_DOWN constraint per ordered pair in the same DMA.
    pub adj_density: f64,
    /// Probability of each (station, channel) domain exclusion.
    pub domain_density: f64,
    /// Fraction of stations given a network affiliation.
    pub affiliate_fraction: f64,
    pub planted: Vec<PlantedClique>,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            stations: 20,
            channels: 8,
            first_channel: 14,
            forbidden: Vec::new(),
            dmas: 3,
            co_density: 0.3,
            cross_dma_co_density: 0.02,
            adj_density: 0.05,
            domain_density: 0.0,
            affiliate_fraction: 0.4,
            planted: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub instance: Instance,
    /// Station indices of each planted clique, sorted, in request order.
    pub planted: Vec<Vec<StationIdx>>,
}

pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<SyntheticInstance> {
    let n = params.stations;
    if n == 0 {
        return Err(InstanceError::Empty);
    }
    if params.dmas == 0 || params.channels == 0 {
        return Err(InstanceError::InvalidParameter(
            "need at least one DMA and one channel".into(),
        ));
    }
    for (name, p) in [
        ("co_density", params.co_density),
        ("cross_dma_co_density", params.cross_dma_co_density),
        ("adj_density", params.adj_density),
        ("domain_density", params.domain_density),
        ("affiliate_fraction", params.affiliate_fraction),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(InstanceError::InvalidParameter(format!(
                "{name} = {p} outside [0, 1]"
            )));
        }
    }
    for pc in &params.planted {
        if pc.size > n {
            return Err(InstanceError::InvalidParameter(format!(
                "planted clique of size {} exceeds {} stations",
                pc.size, n
            )));
        }
        if pc.dma.is_some_and(|d| d == 0 || d as usize > params.dmas) {
            return Err(InstanceError::InvalidParameter(format!(
                "planted clique DMA {:?} out of range",
                pc.dma
            )));
        }
    }

    let mut rng = crate::seed::rng(seed);
    let universe = ChannelUniverse::contiguous(
        params.first_channel,
        params.channels,
        params.forbidden.iter().copied(),
    );

    let mut stations: Vec<Station> = (0..n)
        .map(|i| {
            let affiliation = if rng.gen_bool(params.affiliate_fraction) {
                Affiliation::NETWORKS[rng.gen_range(0..Affiliation::NETWORKS.len())]
            } else {
                Affiliation::None
            };
            Station {
                id: format!("S{:04}", i + 1),
                dma: (i % params.dmas) as u32 + 1,
                affiliation,
                revenue: (rng.gen::<f64>() * 1e7).round(),
            }
        })
        .collect();

    let mut planted = Vec::with_capacity(params.planted.len());
    for pc in &params.planted {
        let mut members: Vec<StationIdx> = (0..n).collect();
        members.shuffle(&mut rng);
        members.truncate(pc.size);
        members.sort_unstable();
        if let Some(dma) = pc.dma {
            for &m in &members {
                stations[m].dma = dma;
            }
        }
        planted.push(members);
    }

    let mut interference = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            let same = stations[a].dma == stations[b].dma;
            let p = if same {
                params.co_density
            } else {
                params.cross_dma_co_density
            };
            if rng.gen_bool(p) {
                interference.insert(Interference {
                    kind: InterferenceKind::Co,
                    a,
                    b,
                });
            }
            if same {
                for (x, y) in [(a, b), (b, a)] {
                    if rng.gen_bool(params.adj_density) {
                        interference.insert(Interference {
                            kind: InterferenceKind::AdjUp,
                            a: x,
                            b: y,
                        });
                    }
                    if rng.gen_bool(params.adj_density) {
                        interference.insert(Interference {
                            kind: InterferenceKind::AdjDown,
                            a: x,
                            b: y,
                        });
                    }
                }
            }
        }
    }
    for members in &planted {
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                interference.insert(Interference {
                    kind: InterferenceKind::Co,
                    a,
                    b,
                });
            }
        }
    }

    let mut domain = Vec::new();
    if params.domain_density > 0.0 {
        for station in 0..n {
            for &channel in &universe.channels {
                if rng.gen_bool(params.domain_density) {
                    domain.push(DomainConstraint { station, channel });
                }
            }
        }
    }

    let dmas: BTreeMap<u32, String> = (1..=params.dmas as u32)
        .map(|d| (d, format!("Market {d}")))
        .collect();
    let instance = Instance::from_indexed(
        stations,
        universe,
        interference.into_iter().collect(),
        domain,
        dmas,
    )?;
    Ok(SyntheticInstance { instance, planted })
}
