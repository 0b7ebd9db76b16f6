//! CSV and canonical JSON persistence for instances.
//!
//! A CSV instance is a directory holding
//! `stations.csv` (`id,dma_id,affiliation,revenue`),
//! `interference.csv` (`kind,station_a,station_b`),
//! `domain.csv` (`station,channel`) and optionally
//! `dmas.csv` (`dma_id,name`) and `channels.csv` (`channel,forbidden`).
//! Without `channels.csv` the US UHF band is assumed.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Affiliation, ChannelUniverse, DomainConstraint, Instance, InstanceError, Interference,
    InterferenceKind, Result, Station,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFormat {
    /// A directory of CSV files.
    CsvDir,
    /// A single canonical JSON document.
    Json,
}

impl InstanceFormat {
    /// JSON for `*.json` files, CSV directory otherwise.
    pub fn detect(path: &Path) -> Self {
        if path.extension().is_some_and(|e| e == "json") {
            InstanceFormat::Json
        } else {
            InstanceFormat::CsvDir
        }
    }
}

pub fn load_instance(path: &Path, format: InstanceFormat) -> Result<Instance> {
    match format {
        InstanceFormat::CsvDir => load_csv_dir(path),
        InstanceFormat::Json => {
            let doc: InstanceDoc = serde_json::from_reader(File::open(path)?)?;
            doc.into_instance()
        }
    }
}

fn malformed(file: &str, row: usize, message: impl ToString) -> InstanceError {
    InstanceError::Malformed {
        file: file.to_string(),
        row,
        message: message.to_string(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(File::open(path)?))
}

/// Read every record of `file` as `(line, fields)`, checking the column count.
fn records(dir: &Path, file: &str, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = reader(&dir.join(file))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(file, line, e)
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() < columns {
            return Err(malformed(
                file,
                line,
                format!("expected {columns} columns, got {}", rec.len()),
            ));
        }
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(file: &str, row: usize, what: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| malformed(file, row, format!("invalid {what} `{raw}`")))
}

fn load_csv_dir(dir: &Path) -> Result<Instance> {
    let mut stations = Vec::new();
    for (row, f) in records(dir, "stations.csv", 2)? {
        let affiliation = match f.get(2) {
            Some(a) => a
                .parse::<Affiliation>()
                .map_err(|e| malformed("stations.csv", row, e))?,
            None => Affiliation::None,
        };
        let revenue = match f.get(3).map(String::as_str) {
            None | Some("") => 0.0,
            Some(r) => parse::<f64>("stations.csv", row, "revenue", r)?,
        };
        stations.push(Station {
            id: f[0].clone(),
            dma: parse("stations.csv", row, "dma_id", &f[1])?,
            affiliation,
            revenue,
        });
    }

    let dmas: BTreeMap<u32, String> = if dir.join("dmas.csv").exists() {
        records(dir, "dmas.csv", 2)?
            .into_iter()
            .map(|(row, f)| Ok((parse("dmas.csv", row, "dma_id", &f[0])?, f[1].clone())))
            .collect::<Result<_>>()?
    } else {
        stations
            .iter()
            .map(|s| (s.dma, format!("DMA {}", s.dma)))
            .collect()
    };

    let universe = if dir.join("channels.csv").exists() {
        let mut u = ChannelUniverse {
            channels: Vec::new(),
            forbidden: Default::default(),
        };
        for (row, f) in records(dir, "channels.csv", 1)? {
            let ch: u32 = parse("channels.csv", row, "channel", &f[0])?;
            u.channels.push(ch);
            if matches!(f.get(1).map(String::as_str), Some("1" | "true" | "TRUE")) {
                u.forbidden.insert(ch);
            }
        }
        u.channels.sort_unstable();
        u
    } else {
        ChannelUniverse::us_uhf()
    };

    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = stations.iter().find(|s| !seen.insert(s.id.as_str())) {
        return Err(InstanceError::DuplicateStation(dup.id.clone()));
    }

    // Resolve ids here so errors carry row numbers.
    let index: BTreeMap<&str, usize> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let lookup = |file: &str, row: usize, id: &str| {
        index.get(id).copied().ok_or_else(|| {
            log::debug!("{file}: unknown station `{id}` at row {row}");
            InstanceError::UnknownStation {
                station: id.to_string(),
                row: Some(row),
            }
        })
    };

    let mut interference = Vec::new();
    if dir.join("interference.csv").exists() {
        for (row, f) in records(dir, "interference.csv", 3)? {
            let kind: InterferenceKind = f[0]
                .parse()
                .map_err(|e| malformed("interference.csv", row, e))?;
            let (a, b) = (
                lookup("interference.csv", row, &f[1])?,
                lookup("interference.csv", row, &f[2])?,
            );
            if a == b {
                return Err(malformed(
                    "interference.csv",
                    row,
                    "station constrained against itself",
                ));
            }
            interference.push(Interference { kind, a, b });
        }
    }

    let mut domain = Vec::new();
    if dir.join("domain.csv").exists() {
        for (row, f) in records(dir, "domain.csv", 2)? {
            let station = lookup("domain.csv", row, &f[0])?;
            let channel: u32 = parse("domain.csv", row, "channel", &f[1])?;
            if !universe.contains(channel) {
                return Err(InstanceError::UnknownChannel {
                    channel,
                    row: Some(row),
                });
            }
            domain.push(DomainConstraint { station, channel });
        }
    }

    Instance::from_indexed(stations, universe, interference, domain, dmas)
}

/// Write `instance` as a CSV directory that [`load_instance`] reads back.
pub fn write_instance_csv(instance: &Instance, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| InstanceError::Io(e.into());

    let mut w = csv::Writer::from_path(dir.join("stations.csv")).map_err(csv_err)?;
    w.write_record(["id", "dma_id", "affiliation", "revenue"])
        .map_err(csv_err)?;
    for s in instance.stations() {
        let aff = if s.affiliation.is_affiliate() {
            s.affiliation.as_str()
        } else {
            ""
        };
        w.write_record([
            s.id.as_str(),
            &s.dma.to_string(),
            aff,
            &s.revenue.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("interference.csv")).map_err(csv_err)?;
    w.write_record(["kind", "station_a", "station_b"])
        .map_err(csv_err)?;
    for c in instance.interference() {
        w.write_record([
            c.kind.as_str(),
            &instance.station(c.a).id,
            &instance.station(c.b).id,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("domain.csv")).map_err(csv_err)?;
    w.write_record(["station", "channel"]).map_err(csv_err)?;
    for d in instance.domain() {
        w.write_record([
            instance.station(d.station).id.as_str(),
            &d.channel.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("dmas.csv")).map_err(csv_err)?;
    w.write_record(["dma_id", "name"]).map_err(csv_err)?;
    for (id, name) in instance.dmas() {
        w.write_record([id.to_string().as_str(), name])
            .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("channels.csv")).map_err(csv_err)?;
    w.write_record(["channel", "forbidden"]).map_err(csv_err)?;
    let u = instance.universe();
    for ch in &u.channels {
        let f = if u.forbidden.contains(ch) { "1" } else { "0" };
        w.write_record([ch.to_string().as_str(), f])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceRow {
    pub kind: InterferenceKind,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub station: String,
    pub channel: u32,
}

/// Canonical JSON form of an [`Instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub stations: Vec<Station>,
    pub universe: ChannelUniverse,
    pub interference: Vec<InterferenceRow>,
    pub domain: Vec<DomainRow>,
    pub dmas: BTreeMap<u32, String>,
}

impl InstanceDoc {
    pub fn from_instance(inst: &Instance) -> Self {
        let id = |i: usize| inst.station(i).id.clone();
        InstanceDoc {
            stations: inst.stations().to_vec(),
            universe: inst.universe().clone(),
            interference: inst
                .interference()
                .iter()
                .map(|c| InterferenceRow {
                    kind: c.kind,
                    a: id(c.a),
                    b: id(c.b),
                })
                .collect(),
            domain: inst
                .domain()
                .iter()
                .map(|d| DomainRow {
                    station: id(d.station),
                    channel: d.channel,
                })
                .collect(),
            dmas: inst.dmas().clone(),
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        Instance::new(
            self.stations,
            self.universe,
            self.interference.into_iter().map(|r| (r.kind, r.a, r.b)),
            self.domain.into_iter().map(|r| (r.station, r.channel)),
            self.dmas,
        )
    }
}

impl Instance {
    /// Canonical JSON text; loading it back and re-serializing is byte-identical.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceDoc::from_instance(self))
            .expect("instance serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn from_json_str(text: &str) -> Result<Instance> {
        serde_json::from_str::<InstanceDoc>(text)?.into_instance()
    }
}
