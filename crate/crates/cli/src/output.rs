use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Output directory plus the config digest stamped into every file.
#[derive(Debug, Clone)]
pub struct Output {
    dir: PathBuf,
    digest: String,
}

#[derive(Serialize)]
struct Provenance<'a> {
    record: &'static str,
    config_digest: &'a str,
    tool: &'static str,
}

impl Output {
    pub fn new(dir: &Path, digest: String) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            digest,
        })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    /// CSV file whose first line is a `# config_digest:` comment.
    pub fn csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<PathBuf> {
        let mut w = self.create(name)?;
        writeln!(w, "# config_digest: {}", self.digest)?;
        body(&mut w)?;
        w.flush()?;
        log::info!("wrote {name}");
        Ok(self.path(name))
    }

    /// JSON-lines file opening with a provenance record.
    pub fn jsonl(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<PathBuf> {
        let mut w = self.create(name)?;
        let p = Provenance {
            record: "provenance",
            config_digest: &self.digest,
            tool: concat!("repack ", env!("CARGO_PKG_VERSION")),
        };
        writeln!(w, "{}", serde_json::to_string(&p)?)?;
        body(&mut w)?;
        w.flush()?;
        log::info!("wrote {name}");
        Ok(self.path(name))
    }

    /// Pretty JSON document with a top-level `config_digest` field.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut doc = serde_json::to_value(value)?;
        if let Some(obj) = doc.as_object_mut() {
            obj.insert("config_digest".into(), self.digest.clone().into());
        }
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        log::info!("wrote {name}");
        Ok(self.path(name))
    }

    /// Plain text with a caller-formatted digest comment.
    pub fn text(
        &self,
        name: &str,
        comment: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<PathBuf> {
        let mut w = self.create(name)?;
        writeln!(w, "{comment} config_digest: {}", self.digest)?;
        body(&mut w)?;
        w.flush()?;
        log::info!("wrote {name}");
        Ok(self.path(name))
    }
}

/// Serialize one JSON-lines record.
pub fn line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}
