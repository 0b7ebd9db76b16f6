//! Joint distributions over station participation decisions.
//!
//! A bit of 1 means the station does not participate and must stay on air.
//! Draws are threshold couplings over uniform variates: one per station,
//! one per network group and one top-level variate. Reusing the same
//! variates at a larger `alpha` yields a superset of non-participants.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instance::{Affiliation, Instance, StationIdx};

pub const DEFAULT_TOP_PROB: f64 = 0.9;

fn default_top_prob() -> f64 {
    DEFAULT_TOP_PROB
}

#[derive(Debug, Error, PartialEq)]
pub enum ParticipationError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("alpha {alpha} exceeds top-level probability {top_prob}")]
    AlphaAboveTop { alpha: f64, top_prob: f64 },
    #[error("the revenue model has no alpha parameter")]
    NoAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Every station independently with probability `alpha`.
    RandomBroadcasters { alpha: f64 },
    /// Each network group decides as a block with probability `alpha`;
    /// non-affiliates decide independently.
    RandomAffiliates { alpha: f64 },
    /// A top-level variable gates every network; given it is on, each
    /// network is on with probability `alpha / top_prob`.
    CorrelatedAffiliates {
        alpha: f64,
        #[serde(default = "default_top_prob")]
        top_prob: f64,
    },
    /// Independent per-station probabilities from revenue rank.
    Revenue { beta: f64, gamma: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ParticipationError> {
        let unit = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ParticipationError::OutOfRange {
                    name,
                    value,
                    range: "[0, 1]",
                })
            }
        };
        match *self {
            ModelSpec::RandomBroadcasters { alpha } | ModelSpec::RandomAffiliates { alpha } => {
                unit("alpha", alpha)
            }
            ModelSpec::CorrelatedAffiliates { alpha, top_prob } => {
                unit("alpha", alpha)?;
                unit("top_prob", top_prob)?;
                if alpha > top_prob {
                    return Err(ParticipationError::AlphaAboveTop { alpha, top_prob });
                }
                Ok(())
            }
            ModelSpec::Revenue { beta, gamma } => {
                unit("beta", beta)?;
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return Err(ParticipationError::OutOfRange {
                        name: "gamma",
                        value: gamma,
                        range: "[0, inf)",
                    });
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::RandomBroadcasters { .. } => "random_broadcasters",
            ModelSpec::RandomAffiliates { .. } => "random_affiliates",
            ModelSpec::CorrelatedAffiliates { .. } => "correlated_affiliates",
            ModelSpec::Revenue { .. } => "revenue",
        }
    }

    /// Parameter string for summary tables, e.g. `alpha=0.6;top_prob=0.9`.
    pub fn params(&self) -> String {
        match *self {
            ModelSpec::RandomBroadcasters { alpha } | ModelSpec::RandomAffiliates { alpha } => {
                format!("alpha={alpha}")
            }
            ModelSpec::CorrelatedAffiliates { alpha, top_prob } => {
                format!("alpha={alpha};top_prob={top_prob}")
            }
            ModelSpec::Revenue { beta, gamma } => format!("beta={beta};gamma={gamma}"),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            ModelSpec::RandomBroadcasters { alpha }
            | ModelSpec::RandomAffiliates { alpha }
            | ModelSpec::CorrelatedAffiliates { alpha, .. } => Some(alpha),
            ModelSpec::Revenue { .. } => None,
        }
    }

    /// The same family at a different `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<ModelSpec, ParticipationError> {
        let spec = match *self {
            ModelSpec::RandomBroadcasters { .. } => ModelSpec::RandomBroadcasters { alpha },
            ModelSpec::RandomAffiliates { .. } => ModelSpec::RandomAffiliates { alpha },
            ModelSpec::CorrelatedAffiliates { top_prob, .. } => {
                ModelSpec::CorrelatedAffiliates { alpha, top_prob }
            }
            ModelSpec::Revenue { .. } => return Err(ParticipationError::NoAlpha),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One participation draw, in instance station order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParticipationVector {
    bits: Vec<bool>,
}

impl ParticipationVector {
    pub fn new(bits: Vec<bool>) -> Self {
        ParticipationVector { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, station: StationIdx) -> bool {
        self.bits[station]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Stations with bit 1; these must be repacked.
    pub fn non_participants(&self) -> Vec<StationIdx> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Hex SHA-256 of the bit string, for trial reports.
    pub fn digest(&self) -> String {
        let text: String = self
            .bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// The uniform variates behind one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedDraws {
    pub top: f64,
    pub network: [f64; 5],
    pub station: Vec<f64>,
}

impl SharedDraws {
    pub fn draw(stations: usize, seed: u64) -> Self {
        let mut rng = crate::seed::rng(seed);
        let top = rng.gen::<f64>();
        let network = std::array::from_fn(|_| rng.gen::<f64>());
        let station = (0..stations).map(|_| rng.gen::<f64>()).collect();
        SharedDraws {
            top,
            network,
            station,
        }
    }
}

/// Evaluate `model` on given variates. A variate `u` turns its bit on when
/// `u < threshold`.
pub fn sample_with(
    model: &ModelSpec,
    instance: &Instance,
    draws: &SharedDraws,
) -> Result<ParticipationVector, ParticipationError> {
    model.validate()?;
    assert_eq!(
        draws.station.len(),
        instance.len(),
        "one variate per station"
    );
    let own = |i: StationIdx, p: f64| draws.station[i] < p;
    let bits = match *model {
        ModelSpec::RandomBroadcasters { alpha } => {
            (0..instance.len()).map(|i| own(i, alpha)).collect()
        }
        ModelSpec::RandomAffiliates { alpha } => {
            let on: Vec<bool> = draws.network.iter().map(|&v| v < alpha).collect();
            grouped(instance, &on, |i| own(i, alpha))
        }
        ModelSpec::CorrelatedAffiliates { alpha, top_prob } => {
            let top_on = draws.top < top_prob;
            let conditional = if top_prob > 0.0 {
                alpha / top_prob
            } else {
                0.0
            };
            let on: Vec<bool> = draws
                .network
                .iter()
                .map(|&v| top_on && v < conditional)
                .collect();
            grouped(instance, &on, |i| own(i, alpha))
        }
        ModelSpec::Revenue { beta, gamma } => {
            let probs = revenue_probabilities(instance, beta, gamma)?;
            probs.iter().enumerate().map(|(i, &p)| own(i, p)).collect()
        }
    };
    Ok(ParticipationVector { bits })
}

fn grouped(
    instance: &Instance,
    network_on: &[bool],
    independent: impl Fn(StationIdx) -> bool,
) -> Vec<bool> {
    instance
        .stations()
        .iter()
        .enumerate()
        .map(|(i, s)| match s.affiliation.network_index() {
            Some(g) => network_on[g],
            None => independent(i),
        })
        .collect()
}

/// Draw one participation vector. Deterministic in `seed`.
pub fn sample(
    model: &ModelSpec,
    instance: &Instance,
    seed: u64,
) -> Result<ParticipationVector, ParticipationError> {
    sample_with(model, instance, &SharedDraws::draw(instance.len(), seed))
}

/// Per-station non-participation probabilities under the revenue model.
///
/// Revenues are sorted ascending and the value at 1-based index
/// `k = max(1, ceil((1 - beta) * n))` becomes the pivot. Shifted revenues are
/// divided by `max |shifted| / 4`, passed through the logistic function,
/// multiplied by `gamma` for affiliates and clamped to `[0, 1]`.
pub fn revenue_probabilities(
    instance: &Instance,
    beta: f64,
    gamma: f64,
) -> Result<Vec<f64>, ParticipationError> {
    ModelSpec::Revenue { beta, gamma }.validate()?;
    let revenues: Vec<f64> = instance.stations().iter().map(|s| s.revenue).collect();
    let mut sorted = revenues.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = (((1.0 - beta) * n as f64).ceil() as usize).clamp(1, n);
    let pivot = sorted[k - 1];
    let scale = revenues
        .iter()
        .map(|r| (r - pivot).abs())
        .fold(0.0, f64::max)
        / 4.0;
    Ok(instance
        .stations()
        .iter()
        .zip(&revenues)
        .map(|(s, &r)| {
            let z = if scale > 0.0 {
                (r - pivot) / scale
            } else {
                0.0
            };
            let p = 1.0 / (1.0 + (-z).exp());
            let p = if s.affiliation.is_affiliate() {
                p * gamma
            } else {
                p
            };
            p.clamp(0.0, 1.0)
        })
        .collect())
}

/// Probability that a network group is all ones in the correlated model,
/// from the conditional tables: `P(top) * P(group | top)`.
pub fn correlated_group_probability(alpha: f64, top_prob: f64) -> f64 {
    if top_prob == 0.0 {
        return 0.0;
    }
    top_prob * (alpha / top_prob)
}

/// Stations grouped by network, for checks on block behaviour.
pub fn network_groups(instance: &Instance) -> Vec<Vec<StationIdx>> {
    let mut groups = vec![Vec::new(); Affiliation::NETWORKS.len()];
    for (i, s) in instance.stations().iter().enumerate() {
        if let Some(g) = s.affiliation.network_index() {
            groups[g].push(i);
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_synthetic, ChannelUniverse, Station, SyntheticParams};
    use std::collections::BTreeMap;

    fn inst() -> Instance {
        let params = SyntheticParams {
            stations: 40,
            affiliate_fraction: 0.5,
            ..Default::default()
        };
        generate_synthetic(&params, 8).unwrap().instance
    }

    #[test]
    fn extreme_alphas() {
        let inst = inst();
        for seed in 0..20 {
            let zero = sample(&ModelSpec::RandomBroadcasters { alpha: 0.0 }, &inst, seed).unwrap();
            assert_eq!(zero.count(), 0);
            let one = sample(&ModelSpec::RandomAffiliates { alpha: 1.0 }, &inst, seed).unwrap();
            assert_eq!(one.count(), inst.len());
        }
    }

    #[test]
    fn affiliate_groups_move_together() {
        let inst = inst();
        let groups = network_groups(&inst);
        for seed in 0..200 {
            for model in [
                ModelSpec::RandomAffiliates { alpha: 0.5 },
                ModelSpec::CorrelatedAffiliates {
                    alpha: 0.6,
                    top_prob: 0.9,
                },
            ] {
                let x = sample(&model, &inst, seed).unwrap();
                for g in &groups {
                    assert!(g.iter().all(|&i| x.get(i) == x.get(g[0])));
                }
            }
        }
    }

    #[test]
    fn seed_determinism_and_nesting() {
        let inst = inst();
        let m = ModelSpec::CorrelatedAffiliates {
            alpha: 0.3,
            top_prob: 0.9,
        };
        assert_eq!(sample(&m, &inst, 5).unwrap(), sample(&m, &inst, 5).unwrap());
        let draws = SharedDraws::draw(inst.len(), 11);
        let lo = sample_with(&m, &inst, &draws).unwrap();
        let hi = sample_with(&m.with_alpha(0.7).unwrap(), &inst, &draws).unwrap();
        assert!(lo.non_participants().iter().all(|&i| hi.get(i)));
    }

    #[test]
    fn invalid_parameters() {
        assert!(ModelSpec::RandomBroadcasters { alpha: 1.5 }
            .validate()
            .is_err());
        assert!(ModelSpec::CorrelatedAffiliates {
            alpha: 0.95,
            top_prob: 0.9
        }
        .validate()
        .is_err());
        assert!(ModelSpec::Revenue {
            beta: 0.5,
            gamma: -1.0
        }
        .validate()
        .is_err());
        assert!(ModelSpec::Revenue {
            beta: 0.5,
            gamma: 1.0
        }
        .with_alpha(0.2)
        .is_err());
    }

    #[test]
    fn group_probability_is_alpha() {
        for alpha in [0.0, 0.1, 0.3, 0.6, 0.9] {
            assert!((correlated_group_probability(alpha, 0.9) - alpha).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn config_format() {
        let m: ModelSpec =
            serde_json::from_str(r#"{"kind":"correlated_affiliates","alpha":0.6}"#).unwrap();
        assert_eq!(
            m,
            ModelSpec::CorrelatedAffiliates {
                alpha: 0.6,
                top_prob: 0.9
            }
        );
        assert_eq!(m.params(), "alpha=0.6;top_prob=0.9");
    }

    #[test]
    fn revenue_pipeline_hand_values() {
        // revenues 0, 10, 20, 30, 40; beta = 0.4 puts the pivot at k = 3 (value 20)
        let stations: Vec<Station> = (0..5)
            .map(|i| Station {
                id: format!("s{i}"),
                dma: 1,
                affiliation: if i == 1 {
                    Affiliation::Cbs
                } else {
                    Affiliation::None
                },
                revenue: 10.0 * i as f64,
            })
            .collect();
        let inst = Instance::new(
            stations,
            ChannelUniverse::contiguous(14, 3, []),
            Vec::new(),
            Vec::new(),
            BTreeMap::from([(1, "m".into())]),
        )
        .unwrap();
        let p = revenue_probabilities(&inst, 0.4, 0.5).unwrap();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        assert_eq!(p[2], 0.5);
        assert!((p[4] - sig(4.0)).abs() < 1e-12);
        assert!((p[0] - sig(-4.0)).abs() < 1e-12);
        assert!((p[1] - 0.5 * sig(-2.0)).abs() < 1e-12);
        let zero = revenue_probabilities(&inst, 0.4, 0.0).unwrap();
        assert_eq!(zero[1], 0.0);
    }
}
