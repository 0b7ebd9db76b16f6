//! Statistics over sampled solution sets.

mod diversity;
mod tables;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::instance::{ChannelAssignment, Instance};

pub use diversity::{
    broadcaster_frequencies, diversity_report, jaccard_distance, missing_mass, sample_missing_mass,
    solution_distance, DiversityReport, DmaDiversity, MissingMass, SolutionIdentity,
    StationFrequency,
};
pub use tables::{
    write_correlations_csv, write_delta_csv, write_diversity_csv, write_dma_count_csv,
    write_dma_stats_csv, write_frequencies_csv, write_missing_mass_csv, DmaCountRow,
    MissingMassRow,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("statistics cover different DMA sets")]
    MismatchedDmas,
    #[error("row {row} has {got} counts, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AnalyticsError> = std::result::Result<T, E>;

/// Cleared-station counts per sample and DMA.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingCounts {
    /// DMA ids, ascending.
    pub dmas: Vec<u32>,
    pub names: Vec<String>,
    /// Stations in each DMA.
    pub sizes: Vec<usize>,
    /// `rows[sample][dma_position]`.
    pub rows: Vec<Vec<usize>>,
}

impl ClearingCounts {
    pub fn from_assignments<'a>(
        instance: &Instance,
        samples: impl IntoIterator<Item = &'a ChannelAssignment>,
    ) -> Self {
        let dmas: Vec<u32> = instance.dmas().keys().copied().collect();
        let pos: BTreeMap<u32, usize> = dmas.iter().enumerate().map(|(p, &d)| (d, p)).collect();
        let rows = samples
            .into_iter()
            .map(|a| {
                let mut row = vec![0usize; dmas.len()];
                for i in a.cleared() {
                    row[pos[&instance.station(i).dma]] += 1;
                }
                row
            })
            .collect();
        ClearingCounts {
            names: dmas
                .iter()
                .map(|&d| instance.dma_name(d).to_string())
                .collect(),
            sizes: dmas.iter().map(|&d| instance.members_of(d).len()).collect(),
            dmas,
            rows,
        }
    }

    /// Build from raw counts; names default to `DMA <id>` and sizes to 0.
    pub fn from_rows(dmas: Vec<u32>, rows: Vec<Vec<usize>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dmas.len() {
                return Err(AnalyticsError::RowLength {
                    row: r,
                    expected: dmas.len(),
                    got: row.len(),
                });
            }
        }
        Ok(ClearingCounts {
            names: dmas.iter().map(|d| format!("DMA {d}")).collect(),
            sizes: vec![0; dmas.len()],
            dmas,
            rows,
        })
    }

    pub fn samples(&self) -> usize {
        self.rows.len()
    }

    fn column(&self, p: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[p] as f64).collect()
    }

    /// Total cleared per sample.
    pub fn nationwide(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    /// DMAs with at least one clearing, per sample.
    pub fn dmas_with_clearing(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|&&c| c > 0).count())
            .collect()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`), 0 for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` over `n` pairs, from a t statistic on `n - 2`
/// degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaStatsRow {
    pub dma: u32,
    pub name: String,
    pub size: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaClearingStats {
    /// One row per DMA in id order.
    pub rows: Vec<DmaStatsRow>,
    /// Mean total cleared per sample.
    pub nationwide_mean: f64,
}

impl DmaClearingStats {
    /// Rows by mean descending, ties by DMA id.
    pub fn ranked(&self) -> Vec<&DmaStatsRow> {
        let mut v: Vec<&DmaStatsRow> = self.rows.iter().collect();
        v.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.dma.cmp(&b.dma)));
        v
    }

    /// Per-DMA means add up to the nationwide mean.
    pub fn conservation_holds(&self, tolerance: f64) -> bool {
        let total: f64 = self.rows.iter().map(|r| r.mean).sum();
        (total - self.nationwide_mean).abs() <= tolerance
    }
}

pub fn dma_stats(counts: &ClearingCounts) -> Result<DmaClearingStats> {
    let n = counts.samples();
    if n == 0 {
        return Err(AnalyticsError::TooFewSamples { need: 1, got: 0 });
    }
    let rows = (0..counts.dmas.len())
        .map(|p| {
            let col = counts.column(p);
            DmaStatsRow {
                dma: counts.dmas[p],
                name: counts.names[p].clone(),
                size: counts.sizes[p],
                mean: mean(&col),
                std_dev: std_dev(&col),
                min: counts.rows.iter().map(|r| r[p]).min().expect("n > 0"),
                samples: n,
            }
        })
        .collect();
    let totals: Vec<f64> = counts.nationwide().iter().map(|&t| t as f64).collect();
    Ok(DmaClearingStats {
        rows,
        nationwide_mean: mean(&totals),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaCorrelation {
    pub dma_a: u32,
    pub name_a: String,
    pub mean_a: f64,
    pub dma_b: u32,
    pub name_b: String,
    pub mean_b: f64,
    pub r: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationFilter {
    /// Only DMAs with at least this mean clearing count take part.
    pub min_mean: f64,
    /// Keep pairs with two-sided p-value at most this.
    pub p_threshold: f64,
    /// Optional cap on `r`: keep pairs with `r <= max_r`.
    pub max_r: Option<f64>,
}

impl Default for CorrelationFilter {
    fn default() -> Self {
        CorrelationFilter {
            min_mean: 2.0,
            p_threshold: 0.01,
            max_r: None,
        }
    }
}

/// Significant pairwise correlations of per-sample DMA clearing counts,
/// most negative first. Pairs involving a zero-variance DMA are skipped.
pub fn dma_correlations(
    counts: &ClearingCounts,
    filter: &CorrelationFilter,
) -> Result<Vec<DmaCorrelation>> {
    let n = counts.samples();
    if n < 3 {
        return Err(AnalyticsError::TooFewSamples { need: 3, got: n });
    }
    let cols: Vec<Vec<f64>> = (0..counts.dmas.len()).map(|p| counts.column(p)).collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let eligible: Vec<usize> = (0..cols.len())
        .filter(|&p| means[p] >= filter.min_mean)
        .collect();
    for &p in &eligible {
        if std_dev(&cols[p]) == 0.0 {
            log::info!(
                "skipping DMA {} in correlations: zero variance",
                counts.dmas[p]
            );
        }
    }
    let pairs: Vec<(usize, usize)> = eligible
        .iter()
        .enumerate()
        .flat_map(|(x, &a)| eligible[x + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let mut out: Vec<DmaCorrelation> = pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let r = pearson(&cols[a], &cols[b])?;
            let p_value = correlation_p_value(r, n);
            let keep = p_value <= filter.p_threshold && filter.max_r.is_none_or(|m| r <= m);
            keep.then(|| DmaCorrelation {
                dma_a: counts.dmas[a],
                name_a: counts.names[a].clone(),
                mean_a: means[a],
                dma_b: counts.dmas[b],
                name_b: counts.names[b].clone(),
                mean_b: means[b],
                r,
                p_value,
            })
        })
        .collect();
    out.sort_by(|x, y| {
        x.r.total_cmp(&y.r)
            .then((x.dma_a, x.dma_b).cmp(&(y.dma_a, y.dma_b)))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaDelta {
    pub dma: u32,
    pub name: String,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_b - mean_a`.
    pub delta: f64,
    /// Negative deltas are usually sampling noise.
    pub negative: bool,
}

/// Per-DMA change in mean clearings from `a` to `b`, largest first.
pub fn config_delta(a: &DmaClearingStats, b: &DmaClearingStats) -> Result<Vec<DmaDelta>> {
    let ids = |s: &DmaClearingStats| s.rows.iter().map(|r| r.dma).collect::<Vec<_>>();
    if ids(a) != ids(b) {
        return Err(AnalyticsError::MismatchedDmas);
    }
    let mut out: Vec<DmaDelta> = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| {
            let delta = rb.mean - ra.mean;
            DmaDelta {
                dma: ra.dma,
                name: ra.name.clone(),
                mean_a: ra.mean,
                mean_b: rb.mean,
                delta,
                negative: delta < 0.0,
            }
        })
        .collect();
    out.sort_by(|x, y| y.delta.total_cmp(&x.delta).then(x.dma.cmp(&y.dma)));
    Ok(out)
}
