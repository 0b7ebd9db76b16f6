use std::collections::{BTreeMap, BTreeSet};

use super::{
    derive_available_channels, AvailableChannels, Instance, InstanceError, Result, StationIdx,
};

/// A feasibility question over an [`Instance`]: a clearing target, the set of
/// stations that must stay on air, and optional cardinality caps.
#[derive(Debug, Clone)]
pub struct RepackProblem<'a> {
    pub instance: &'a Instance,
    pub available: AvailableChannels,
    pub use_domain_constraints: bool,
    /// `R`: stations that must be assigned a channel.
    pub must_repack: BTreeSet<StationIdx>,
    /// `b`: at most this many stations cleared nationwide.
    pub max_cleared_nationwide: Option<usize>,
    /// `b'`: at most this many stations cleared in the given DMA.
    pub dma_caps: BTreeMap<u32, usize>,
    /// `d`: at most this many DMAs with any cleared station.
    pub max_dmas_with_clearing: Option<usize>,
}

impl<'a> RepackProblem<'a> {
    /// Domain constraints on, nobody forced on air, no caps.
    pub fn new(instance: &'a Instance, target_mhz: u32) -> Result<Self> {
        Ok(RepackProblem {
            instance,
            available: derive_available_channels(target_mhz, instance.universe())?,
            use_domain_constraints: true,
            must_repack: BTreeSet::new(),
            max_cleared_nationwide: None,
            dma_caps: BTreeMap::new(),
            max_dmas_with_clearing: None,
        })
    }

    pub fn target_mhz(&self) -> u32 {
        self.available.target_mhz
    }

    pub fn with_domain(mut self, on: bool) -> Self {
        self.use_domain_constraints = on;
        self
    }

    pub fn with_must_repack(
        mut self,
        stations: impl IntoIterator<Item = StationIdx>,
    ) -> Result<Self> {
        let set: BTreeSet<_> = stations.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&i| i >= self.instance.len()) {
            return Err(InstanceError::UnknownStation {
                station: format!("#{bad}"),
                row: None,
            });
        }
        self.must_repack = set;
        Ok(self)
    }

    pub fn repack_all(self) -> Self {
        let n = self.instance.len();
        self.with_must_repack(0..n).expect("indices in range")
    }

    pub fn with_max_cleared(mut self, cap: Option<usize>) -> Self {
        self.max_cleared_nationwide = cap;
        self
    }

    pub fn with_dma_cap(mut self, dma: u32, cap: usize) -> Result<Self> {
        if !self.instance.dmas().contains_key(&dma) {
            return Err(InstanceError::InvalidParameter(format!(
                "unknown DMA {dma}"
            )));
        }
        self.dma_caps.insert(dma, cap);
        Ok(self)
    }

    pub fn with_max_dmas(mut self, cap: Option<usize>) -> Self {
        self.max_dmas_with_clearing = cap;
        self
    }

    pub fn is_must_repack(&self, station: StationIdx) -> bool {
        self.must_repack.contains(&station)
    }

    /// Whether `station` may not use `channel`, counting universal forbidden
    /// channels always and per-station domain rows only when enabled.
    pub fn channel_excluded(&self, station: StationIdx, channel: u32) -> bool {
        self.available.forbidden.contains(&channel)
            || (self.use_domain_constraints && self.domain_excludes(station, channel))
    }

    fn domain_excludes(&self, station: StationIdx, channel: u32) -> bool {
        self.instance
            .domain()
            .binary_search(&super::DomainConstraint { station, channel })
            .is_ok()
    }
}
