//! Byte-stable artifacts: CSV snapshots, JSON documents and the manifest
//! that hashes them.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use sncl_core::Field;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// `x,u` rows with 17 significant digits.
pub fn field_csv(field: &Field) -> String {
    let grid = field.grid();
    let mut out = String::with_capacity(48 * grid.n_nodes() + 4);
    out.push_str("x,u\n");
    for (i, u) in field.values().iter().enumerate() {
        out.push_str(&format!("{:.16e},{:.16e}\n", grid.node(i), u));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub role: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    InvariantViolation,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputManifest {
    pub experiment: String,
    pub mode: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tool: String,
    pub version: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

/// Writes files under one directory and remembers their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write(&mut self, rel: &str, role: &str, time: Option<f64>, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            role: role.to_string(),
            time,
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_field(&mut self, rel: &str, role: &str, field: &Field) -> io::Result<()> {
        self.write(rel, role, Some(field.time()), field_csv(field).as_bytes())
    }

    pub fn write_json(&mut self, rel: &str, role: &str, json: &str) -> io::Result<()> {
        self.write(rel, role, None, json.as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(
        &self,
        experiment: &str,
        mode: &str,
        status: RunStatus,
        error: Option<String>,
        config: serde_json::Value,
    ) -> io::Result<OutputManifest> {
        let manifest = OutputManifest {
            experiment: experiment.to_string(),
            mode: mode.to_string(),
            status,
            error,
            tool: "sncl".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            files: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
        fs::write(self.dir.join(MANIFEST), text + "\n")?;
        Ok(manifest)
    }
}

/// Checks that every file listed in `dir/manifest.json` exists with the
/// recorded hash.
pub fn verify_manifest(dir: &Path) -> Result<usize, String> {
    let text = fs::read_to_string(dir.join(MANIFEST)).map_err(|e| format!("{MANIFEST}: {e}"))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{MANIFEST}: {e}"))?;
    let files = doc["files"].as_array().ok_or("manifest lists no files")?;
    for f in files {
        let rel = f["path"].as_str().ok_or("file entry without path")?;
        let want = f["sha256"].as_str().ok_or("file entry without hash")?;
        let bytes = fs::read(dir.join(rel)).map_err(|e| format!("{rel}: {e}"))?;
        if sha256_hex(&bytes) != want {
            return Err(format!("{rel}: content does not match its hash"));
        }
    }
    Ok(files.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use sncl_core::Grid;

    #[test]
    fn csv_round_trips_exactly() {
        let grid = Grid::new(-1.0, 1.0, 8).unwrap();
        let f = Field::from_fn(grid, 0.0, |x| (3.0 * x).sin() / 7.0).unwrap();
        let text = field_csv(&f);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,u"));
        for (i, line) in lines.enumerate() {
            let (x, u) = line.split_once(',').unwrap();
            assert_eq!(x.parse::<f64>().unwrap(), grid.node(i));
            assert_eq!(u.parse::<f64>().unwrap(), f.values()[i]);
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(dir.path()).unwrap();
        w.write_json("a.json", "test", "{}").unwrap();
        w.finish("t", "solve", RunStatus::Ok, None, serde_json::Value::Null)
            .unwrap();
        assert_eq!(verify_manifest(dir.path()), Ok(1));
        fs::write(dir.path().join("a.json"), "[]").unwrap();
        assert!(verify_manifest(dir.path()).is_err());
    }
}
