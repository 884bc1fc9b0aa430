//! Run directory writer with per-file provenance.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub tool: &'a str,
    pub version: &'a str,
    pub config_sha256: &'a str,
    pub stage: &'a str,
}

/// JSON document wrapped with its provenance block.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    provenance: Provenance<'a>,
    #[serde(flatten)]
    body: &'a T,
}

pub struct RunDir {
    root: PathBuf,
    config_hash: String,
    pub files: Vec<FileRecord>,
}

pub const TOOL: &str = "spillover";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

impl RunDir {
    pub fn create(root: &Path, config_hash: String) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(RunDir {
            root: root.to_path_buf(),
            config_hash,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, stage: &str, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            stage: stage.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes `body` as pretty JSON with a `provenance` block first. `body`
    /// must serialize to a JSON object.
    pub fn write_json<T: Serialize>(&mut self, stage: &str, name: &str, body: &T) -> anyhow::Result<()> {
        let doc = Stamped {
            provenance: Provenance {
                tool: TOOL,
                version: VERSION,
                config_sha256: &self.config_hash.clone(),
                stage,
            },
            body,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(stage, name, text.as_bytes())
    }

    pub fn write_csv(&mut self, stage: &str, name: &str, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        self.write(stage, name, &bytes)
    }
}
