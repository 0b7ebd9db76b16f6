use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{InstanceError, Result};

/// The ordered band of channels stations may occupy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelUniverse {
    pub channels: Vec<u32>,
    /// Channels nobody may be assigned to, e.g. 37 in the US UHF band.
    #[serde(default)]
    pub forbidden: BTreeSet<u32>,
}

impl ChannelUniverse {
    /// UHF channels 14..=51 with channel 37 reserved.
    pub fn us_uhf() -> Self {
        ChannelUniverse {
            channels: (14..=51).collect(),
            forbidden: BTreeSet::from([37]),
        }
    }

    /// `count` consecutive channels starting at `first`.
    pub fn contiguous(first: u32, count: usize, forbidden: impl IntoIterator<Item = u32>) -> Self {
        ChannelUniverse {
            channels: (first..first + count as u32).collect(),
            forbidden: forbidden.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn contains(&self, channel: u32) -> bool {
        self.channels.binary_search(&channel).is_ok()
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(InstanceError::Universe("no channels".into()));
        }
        if self.channels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(InstanceError::Universe(
                "channels must be strictly increasing".into(),
            ));
        }
        if let Some(f) = self.forbidden.iter().find(|f| !self.contains(**f)) {
            return Err(InstanceError::Universe(format!(
                "forbidden channel {f} not in universe"
            )));
        }
        Ok(())
    }
}

/// Channels left for repacking once a clearing target has been carved off
/// the top of the band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailableChannels {
    pub target_mhz: u32,
    /// Remaining channels in increasing order; forbidden ones stay listed.
    pub channels: Vec<u32>,
    /// Members of `channels` that are never assignable.
    pub forbidden: BTreeSet<u32>,
    /// Channels removed from the top of the band.
    pub cleared: Vec<u32>,
}

impl AvailableChannels {
    /// The channel count `c` used for clique thresholds and reporting.
    pub fn count(&self) -> usize {
        self.channels.len()
    }

    pub fn position(&self, channel: u32) -> Option<usize> {
        self.channels.binary_search(&channel).ok()
    }

    pub fn contains(&self, channel: u32) -> bool {
        self.position(channel).is_some()
    }

    pub fn is_usable(&self, channel: u32) -> bool {
        self.contains(channel) && !self.forbidden.contains(&channel)
    }

    pub fn usable_count(&self) -> usize {
        self.channels.len() - self.forbidden.len()
    }
}

/// Remove `floor(M/6)` usable channels from the top of the band.
///
/// Forbidden channels met while walking down are removed without counting
/// towards the target, so on the US band 84 MHz leaves 14..=37 (c = 24, with
/// 37 flagged) while 90 MHz must also give up 37 and leaves 14..=35 (c = 22).
pub fn derive_available_channels(
    target_mhz: u32,
    universe: &ChannelUniverse,
) -> Result<AvailableChannels> {
    if target_mhz == 0 || !target_mhz.is_multiple_of(6) {
        return Err(InstanceError::TargetNotMultipleOf6(target_mhz));
    }
    universe.check()?;
    let needed = (target_mhz / 6) as usize;
    let usable = universe
        .channels
        .iter()
        .filter(|c| !universe.forbidden.contains(c))
        .count();
    if needed > usable {
        return Err(InstanceError::TargetTooLarge {
            target: target_mhz,
            needed,
            usable,
        });
    }

    let mut remaining = universe.channels.clone();
    let mut cleared = Vec::new();
    let mut counted = 0;
    while counted < needed {
        let ch = remaining
            .pop()
            .expect("enough usable channels checked above");
        if !universe.forbidden.contains(&ch) {
            counted += 1;
        }
        cleared.push(ch);
    }
    cleared.reverse();
    let forbidden = remaining
        .iter()
        .copied()
        .filter(|c| universe.forbidden.contains(c))
        .collect();
    Ok(AvailableChannels {
        target_mhz,
        channels: remaining,
        forbidden,
        cleared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn us_band_counts() {
        let u = ChannelUniverse::us_uhf();
        assert_eq!(u.len(), 38);

        let a84 = derive_available_channels(84, &u).unwrap();
        assert_eq!(a84.count(), 24);
        assert_eq!(a84.channels, (14..=37).collect::<Vec<_>>());
        assert!(a84.forbidden.contains(&37));
        assert_eq!(a84.usable_count(), 23);

        let a90 = derive_available_channels(90, &u).unwrap();
        assert_eq!(a90.count(), 22);
        assert_eq!(*a90.channels.last().unwrap(), 35);
        assert!(a90.forbidden.is_empty());

        assert_eq!(derive_available_channels(60, &u).unwrap().count(), 28);
        assert_eq!(derive_available_channels(126, &u).unwrap().count(), 16);
    }

    #[test]
    fn rejects_bad_targets() {
        let u = ChannelUniverse::us_uhf();
        assert!(matches!(
            derive_available_channels(0, &u),
            Err(InstanceError::TargetNotMultipleOf6(0))
        ));
        assert!(matches!(
            derive_available_channels(85, &u),
            Err(InstanceError::TargetNotMultipleOf6(85))
        ));
        assert!(matches!(
            derive_available_channels(6 * 38, &u),
            Err(InstanceError::TargetTooLarge { .. })
        ));
        assert_eq!(derive_available_channels(6 * 37, &u).unwrap().count(), 0);
    }

    proptest! {
        #[test]
        fn larger_targets_never_leave_more_channels(a in 1u32..=37, b in 1u32..=37) {
            let u = ChannelUniverse::us_uhf();
            let (lo, hi) = (a.min(b), a.max(b));
            let c_lo = derive_available_channels(lo * 6, &u).unwrap().count();
            let c_hi = derive_available_channels(hi * 6, &u).unwrap().count();
            prop_assert!(c_hi <= c_lo);
        }
    }
}
