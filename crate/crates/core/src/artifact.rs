//! Append-only output directories with a hashed manifest.
//!
//! A stage writes its files through [`ArtifactWriter`], which refuses to overwrite
//! anything, and finishes by writing `manifest.toml`. A directory without a manifest, or
//! with `status = "incomplete"`, holds partial results.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::artifact(path, e.to_string()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_seconds: f64,
    pub arguments: Vec<String>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::artifact(&path, e.to_string()))?;
        toml::from_str(&text).map_err(|e| Error::artifact(&path, e.to_string()))
    }

    pub fn output_hash(&self, name: &str) -> Option<&str> {
        self.outputs.iter().find(|f| f.path == name).map(|f| f.sha256.as_str())
    }
}

pub struct ArtifactWriter {
    dir: PathBuf,
    stage: String,
    arguments: Vec<String>,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
    notes: BTreeMap<String, String>,
    start: Instant,
}

impl ArtifactWriter {
    /// Opens `dir` for a new stage; it must be absent or empty.
    pub fn create(dir: &Path, stage: &str, arguments: Vec<String>) -> Result<Self> {
        if dir.exists() {
            let mut entries = fs::read_dir(dir).map_err(|e| Error::artifact(dir, e.to_string()))?;
            if entries.next().is_some() {
                return Err(Error::artifact(
                    dir,
                    "output directory is not empty; artifacts are never overwritten",
                ));
            }
        }
        fs::create_dir_all(dir).map_err(|e| Error::artifact(dir, e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stage: stage.into(),
            arguments,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: BTreeMap::new(),
            start: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path) -> Result<String> {
        let h = hash_file(path)?;
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: h.clone(),
        });
        Ok(h)
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.insert(key.into(), value.to_string());
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<String> {
        if name == MANIFEST {
            return Err(Error::artifact(self.dir.join(name), "reserved file name"));
        }
        let path = self.dir.join(name);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::artifact(&path, e.to_string()))?;
        f.write_all(contents).map_err(|e| Error::artifact(&path, e.to_string()))?;
        let h = sha256_hex(contents);
        self.outputs.push(FileRecord {
            path: name.into(),
            sha256: h.clone(),
        });
        Ok(h)
    }

    fn manifest(&self, error: Option<String>) -> Manifest {
        Manifest {
            tool: "porohyper".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stage: self.stage.clone(),
            status: if error.is_some() { "incomplete" } else { "complete" }.into(),
            error,
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
            arguments: self.arguments.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            notes: self.notes.clone(),
        }
    }

    fn write_manifest(&self, m: &Manifest) -> Result<Manifest> {
        let path = self.dir.join(MANIFEST);
        let text = toml::to_string(m).map_err(|e| Error::artifact(&path, e.to_string()))?;
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::artifact(&path, e.to_string()))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::artifact(&path, e.to_string()))?;
        Ok(m.clone())
    }

    pub fn finish(self) -> Result<Manifest> {
        let m = self.manifest(None);
        self.write_manifest(&m)
    }

    /// Records a failed stage; files already written stay, marked incomplete.
    pub fn abort(self, reason: &str) -> Result<Manifest> {
        let m = self.manifest(Some(reason.into()));
        self.write_manifest(&m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn writer_is_append_only() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut w = ArtifactWriter::create(&dir, "demo", vec!["x".into()]).unwrap();
        let h = w.write("a.tsv", b"1\t2\n").unwrap();
        assert!(w.write("a.tsv", b"3\n").is_err());
        assert!(w.write(MANIFEST, b"").is_err());
        w.note("gate", 1e-3);
        let m = w.finish().unwrap();
        assert_eq!(m.status, "complete");
        assert_eq!(Manifest::read(&dir).unwrap().output_hash("a.tsv"), Some(h.as_str()));
        assert_eq!(fs::read(dir.join("a.tsv")).unwrap(), b"1\t2\n");
        assert!(ArtifactWriter::create(&dir, "demo", vec![]).is_err());
    }

    #[test]
    fn aborted_stage_is_flagged() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create(tmp.path(), "demo", vec![]).unwrap();
        w.write("partial.tsv", b"1\n").unwrap();
        w.abort("solver failed").unwrap();
        let m = Manifest::read(tmp.path()).unwrap();
        assert_eq!(m.status, "incomplete");
        assert_eq!(m.error.as_deref(), Some("solver failed"));
    }
}
