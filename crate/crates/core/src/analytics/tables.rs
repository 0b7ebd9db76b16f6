//! CSV layouts for the report tables and figure series.

use std::io::Write;

use serde::Serialize;

use super::{
    DiversityReport, DmaClearingStats, DmaCorrelation, DmaDelta, MissingMass, Result,
    StationFrequency,
};

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Per-DMA clearing statistics, ranked by mean.
pub fn write_dma_stats_csv<W: Write>(stats: &DmaClearingStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rank",
        "dma_id",
        "dma",
        "stations",
        "avg_cleared",
        "std_dev",
        "observed_min",
    ])?;
    for (k, r) in stats.ranked().iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            r.dma.to_string(),
            r.name.clone(),
            r.size.to_string(),
            format!("{:.3}", r.mean),
            format!("{:.3}", r.std_dev),
            r.min.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_correlations_csv<W: Write>(pairs: &[DmaCorrelation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dma_a", "avg_a", "dma_b", "avg_b", "correlation", "p_value"])?;
    for p in pairs {
        w.write_record([
            p.name_a.clone(),
            format!("{:.3}", p.mean_a),
            p.name_b.clone(),
            format!("{:.3}", p.mean_b),
            format!("{:.3}", p.r),
            format!("{:.3e}", p.p_value),
        ])?;
    }
    finish(w)
}

/// One row of the DMAs-with-clearing table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaCountRow {
    pub target_mhz: u32,
    pub min_dmas: Option<usize>,
    pub avg_dmas: f64,
    pub std_dev: f64,
}

pub fn write_dma_count_csv<W: Write>(rows: &[DmaCountRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "target_mhz",
        "min_dmas_with_clearing",
        "avg_dmas_with_clearing",
        "std_dev",
    ])?;
    for r in rows {
        w.write_record([
            r.target_mhz.to_string(),
            r.min_dmas.map(|m| m.to_string()).unwrap_or_default(),
            format!("{:.2}", r.avg_dmas),
            format!("{:.2}", r.std_dev),
        ])?;
    }
    finish(w)
}

/// One row of the missing-mass table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingMassRow {
    pub buffer: usize,
    pub mass: MissingMass,
}

pub fn write_missing_mass_csv<W: Write>(rows: &[MissingMassRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "buffer",
        "draws",
        "unique_solutions",
        "singletons",
        "missing_mass_pct",
    ])?;
    for r in rows {
        w.write_record([
            r.buffer.to_string(),
            r.mass.draws.to_string(),
            r.mass.unique.to_string(),
            r.mass.singletons.to_string(),
            format!("{:.1}", 100.0 * r.mass.estimate),
        ])?;
    }
    finish(w)
}

/// Overall diversity as a first `(all)` row, then DMAs ranked.
pub fn write_diversity_csv<W: Write>(report: &DiversityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "dma_id", "dma", "diversity", "pairs"])?;
    w.write_record(["0", "", "(all)", &format!("{:.4}", report.overall), ""])?;
    for (k, d) in report.per_dma.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            d.dma.to_string(),
            d.name.clone(),
            d.diversity.map(|x| format!("{x:.4}")).unwrap_or_default(),
            d.pairs.to_string(),
        ])?;
    }
    finish(w)
}

/// Sorted per-station clearing fractions.
pub fn write_frequencies_csv<W: Write>(freqs: &[StationFrequency], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "station", "dma_id", "fraction"])?;
    for (k, f) in freqs.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            f.station.clone(),
            f.dma.to_string(),
            f.fraction.to_string(),
        ])?;
    }
    finish(w)
}

/// Sorted per-DMA differences between two configurations.
pub fn write_delta_csv<W: Write>(deltas: &[DmaDelta], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rank", "dma_id", "dma", "mean_a", "mean_b", "delta", "negative",
    ])?;
    for (k, d) in deltas.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            d.dma.to_string(),
            d.name.clone(),
            format!("{:.3}", d.mean_a),
            format!("{:.3}", d.mean_b),
            format!("{:.3}", d.delta),
            d.negative.to_string(),
        ])?;
    }
    finish(w)
}
