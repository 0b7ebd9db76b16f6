use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Result};
use crate::instance::{ChannelAssignment, Instance, StationIdx};

/// `|A xor B| / |A union B|`, and 0 when both sets are empty.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        (union - inter) as f64 / union as f64
    }
}

/// Jaccard distance between the cleared sets of two assignments.
pub fn solution_distance(a: &ChannelAssignment, b: &ChannelAssignment) -> f64 {
    let sa: BTreeSet<StationIdx> = a.cleared().into_iter().collect();
    let sb: BTreeSet<StationIdx> = b.cleared().into_iter().collect();
    jaccard_distance(&sa, &sb)
}

/// Distance on sorted index lists; `None` when both are empty.
fn sorted_distance(a: &[StationIdx], b: &[StationIdx]) -> Option<f64> {
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    (union > 0).then(|| (union - inter) as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaDiversity {
    pub dma: u32,
    pub name: String,
    /// Mean distance over pairs whose restricted union is non-empty.
    pub diversity: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    /// Mean distance over all unordered sample pairs.
    pub overall: f64,
    /// Highest diversity first; DMAs with no qualifying pair last.
    pub per_dma: Vec<DmaDiversity>,
}

pub fn diversity_report<'a>(
    instance: &Instance,
    samples: impl IntoIterator<Item = &'a ChannelAssignment>,
) -> Result<DiversityReport> {
    let cleared: Vec<Vec<StationIdx>> = samples.into_iter().map(|a| a.cleared()).collect();
    let s = cleared.len();
    if s < 2 {
        return Err(AnalyticsError::TooFewSamples { need: 2, got: s });
    }
    let pairs: Vec<(usize, usize)> = (0..s)
        .flat_map(|a| (a + 1..s).map(move |b| (a, b)))
        .collect();
    let total: f64 = pairs
        .par_iter()
        .map(|&(a, b)| sorted_distance(&cleared[a], &cleared[b]).unwrap_or(0.0))
        .sum();
    let overall = total / pairs.len() as f64;

    let mut per_dma: Vec<DmaDiversity> = instance
        .dmas()
        .keys()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&dma| {
            let restricted: Vec<Vec<StationIdx>> = cleared
                .iter()
                .map(|c| {
                    c.iter()
                        .copied()
                        .filter(|&i| instance.station(i).dma == dma)
                        .collect()
                })
                .collect();
            let (sum, count) = pairs
                .iter()
                .filter_map(|&(a, b)| sorted_distance(&restricted[a], &restricted[b]))
                .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
            DmaDiversity {
                dma,
                name: instance.dma_name(dma).to_string(),
                diversity: (count > 0).then(|| sum / count as f64),
                pairs: count,
            }
        })
        .collect();
    per_dma.sort_by(|x, y| {
        let key = |d: &DmaDiversity| d.diversity.unwrap_or(f64::NEG_INFINITY);
        key(y).total_cmp(&key(x)).then(x.dma.cmp(&y.dma))
    });
    Ok(DiversityReport { overall, per_dma })
}

/// How two sampled solutions are judged equal for missing-mass counting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionIdentity {
    /// Same slot for every station.
    #[default]
    FullAssignment,
    /// Same set of cleared stations.
    ClearedSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MissingMass {
    pub draws: usize,
    pub unique: usize,
    pub singletons: usize,
    /// Good-Turing estimate: `singletons / draws`.
    pub estimate: f64,
}

/// Good-Turing missing mass of a sequence of draws.
pub fn missing_mass<T: Hash + Eq>(draws: impl IntoIterator<Item = T>) -> MissingMass {
    let mut freq: HashMap<T, usize> = HashMap::new();
    let mut n = 0;
    for d in draws {
        *freq.entry(d).or_default() += 1;
        n += 1;
    }
    let singletons = freq.values().filter(|&&c| c == 1).count();
    MissingMass {
        draws: n,
        unique: freq.len(),
        singletons,
        estimate: if n == 0 {
            0.0
        } else {
            singletons as f64 / n as f64
        },
    }
}

pub fn sample_missing_mass<'a>(
    samples: impl IntoIterator<Item = &'a ChannelAssignment>,
    identity: SolutionIdentity,
) -> MissingMass {
    match identity {
        SolutionIdentity::FullAssignment => missing_mass(samples),
        SolutionIdentity::ClearedSet => missing_mass(samples.into_iter().map(|a| a.cleared())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationFrequency {
    pub station: String,
    pub dma: u32,
    pub fraction: f64,
}

/// Fraction of samples clearing each station, highest first.
pub fn broadcaster_frequencies<'a>(
    instance: &Instance,
    samples: impl IntoIterator<Item = &'a ChannelAssignment>,
) -> Result<Vec<StationFrequency>> {
    let mut counts = vec![0usize; instance.len()];
    let mut s = 0usize;
    for a in samples {
        for i in a.cleared() {
            counts[i] += 1;
        }
        s += 1;
    }
    if s == 0 {
        return Err(AnalyticsError::TooFewSamples { need: 1, got: 0 });
    }
    let mut out: Vec<StationFrequency> = instance
        .stations()
        .iter()
        .zip(&counts)
        .map(|(st, &c)| StationFrequency {
            station: st.id.clone(),
            dma: st.dma,
            fraction: c as f64 / s as f64,
        })
        .collect();
    out.sort_by(|a, b| {
        b.fraction
            .total_cmp(&a.fraction)
            .then_with(|| a.station.cmp(&b.station))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Affiliation, ChannelUniverse, Slot, Station};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn inst() -> Instance {
        let stations = ["a", "b", "c", "d"]
            .iter()
            .enumerate()
            .map(|(i, id)| Station {
                id: id.to_string(),
                dma: if i < 2 { 1 } else { 2 },
                affiliation: Affiliation::None,
                revenue: 0.0,
            })
            .collect();
        Instance::new(
            stations,
            ChannelUniverse::contiguous(14, 3, []),
            Vec::new(),
            Vec::new(),
            BTreeMap::from([(1, "One".into()), (2, "Two".into())]),
        )
        .unwrap()
    }

    fn cleared(ids: &[usize]) -> ChannelAssignment {
        ChannelAssignment::new(
            (0..4)
                .map(|i| {
                    if ids.contains(&i) {
                        Slot::Cleared
                    } else {
                        Slot::Channel(14)
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn distance_examples() {
        assert_eq!(solution_distance(&cleared(&[0, 1]), &cleared(&[0, 1])), 0.0);
        assert_eq!(solution_distance(&cleared(&[0]), &cleared(&[1])), 1.0);
        assert!(
            (solution_distance(&cleared(&[0, 1]), &cleared(&[1, 2])) - 2.0 / 3.0).abs() < 1e-15
        );
        assert_eq!(solution_distance(&cleared(&[]), &cleared(&[])), 0.0);
    }

    #[test]
    fn diversity_examples() {
        let inst = inst();
        let dup = [cleared(&[0, 2]), cleared(&[0, 2])];
        assert_eq!(diversity_report(&inst, &dup).unwrap().overall, 0.0);
        let two = [cleared(&[0]), cleared(&[1])];
        let r = diversity_report(&inst, &two).unwrap();
        assert_eq!(r.per_dma[0].dma, 1);
        assert_eq!(r.per_dma[0].diversity, Some(1.0));
        assert_eq!(r.per_dma[1].diversity, None);
        assert!(diversity_report(&inst, &two[..1]).is_err());
    }

    #[test]
    fn missing_mass_examples() {
        let same = vec![cleared(&[0]); 5];
        let m = sample_missing_mass(&same, SolutionIdentity::FullAssignment);
        assert_eq!((m.unique, m.singletons, m.estimate), (1, 0, 0.0));
        let distinct = [cleared(&[0]), cleared(&[1]), cleared(&[2])];
        assert_eq!(
            sample_missing_mass(&distinct, SolutionIdentity::FullAssignment).estimate,
            1.0
        );

        // same cleared set on different channels
        let mut x = cleared(&[0]);
        x.set(1, Slot::Channel(15));
        let pair = [cleared(&[0]), x];
        assert_eq!(
            sample_missing_mass(&pair, SolutionIdentity::FullAssignment).singletons,
            2
        );
        assert_eq!(
            sample_missing_mass(&pair, SolutionIdentity::ClearedSet).singletons,
            0
        );
    }

    #[test]
    fn frequencies_sorted() {
        let inst = inst();
        let f = broadcaster_frequencies(&inst, &[cleared(&[2, 3]), cleared(&[2])]).unwrap();
        assert_eq!((f[0].station.as_str(), f[0].fraction), ("c", 1.0));
        assert_eq!(f[1].fraction, 0.5);
        assert_eq!(f[3].fraction, 0.0);
    }

    proptest! {
        #[test]
        fn jaccard_is_a_bounded_metric(
            a in proptest::collection::btree_set(0u8..16, 0..10),
            b in proptest::collection::btree_set(0u8..16, 0..10),
            c in proptest::collection::btree_set(0u8..16, 0..10),
        ) {
            let (ab, bc, ac) = (jaccard_distance(&a, &b), jaccard_distance(&b, &c), jaccard_distance(&a, &c));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, jaccard_distance(&b, &a));
            prop_assert_eq!(ab == 0.0, a == b);
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
