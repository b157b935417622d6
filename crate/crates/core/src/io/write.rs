//! CSV text assembly, atomic file writes, and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::real::fmt_real;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// An in-memory CSV document with a fixed header.
#[derive(Debug, Clone)]
pub struct CsvText {
    width: usize,
    text: String,
}

impl CsvText {
    pub fn new(header: &[&str]) -> Self {
        let mut text = String::new();
        for (c, h) in header.iter().enumerate() {
            if c > 0 {
                text.push(',');
            }
            push_escaped(&mut text, h);
        }
        text.push('\n');
        Self {
            width: header.len(),
            text,
        }
    }

    pub fn row(&mut self) -> RowWriter<'_> {
        RowWriter { doc: self, fields: 0 }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub struct RowWriter<'a> {
    doc: &'a mut CsvText,
    fields: usize,
}

impl RowWriter<'_> {
    fn sep(&mut self) {
        if self.fields > 0 {
            self.doc.text.push(',');
        }
        self.fields += 1;
    }

    pub fn real(mut self, v: f64) -> Self {
        self.sep();
        self.doc.text.push_str(&fmt_real(v));
        self
    }

    pub fn int(mut self, v: u64) -> Self {
        self.sep();
        self.doc.text.push_str(&v.to_string());
        self
    }

    pub fn text(mut self, v: &str) -> Self {
        self.sep();
        push_escaped(&mut self.doc.text, v);
        self
    }

    pub fn flag(self, v: bool) -> Self {
        self.text(if v { "true" } else { "false" })
    }

    pub fn end(self) {
        assert_eq!(self.fields, self.doc.width, "row width differs from header");
        self.doc.text.push('\n');
    }
}

fn push_escaped(out: &mut String, v: &str) {
    if v.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&v.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(v);
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes via a temporary sibling and a rename, so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub name: String,
    pub status: TaskStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Inventory of one command's outputs, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub tasks: Vec<TaskRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::data(&path, 0, format!("cannot read manifest ({e}); the run is incomplete or not a run directory"))
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn failed_tasks(&self) -> Vec<&TaskRecord> {
        self.tasks.iter().filter(|t| t.status == TaskStatus::Failed).collect()
    }

    pub fn file(&self, rel: &str) -> Option<&FileRecord> {
        self.files.iter().find(|f| f.path == rel)
    }

    /// Files whose bytes no longer match their recorded checksum (or are gone).
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match fs::read(dir.join(&f.path)) {
                Ok(bytes) => sha256_hex(&bytes) != f.sha256,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }

    /// Reads a listed file after checking its checksum.
    pub fn read_verified(&self, dir: &Path, rel: &str) -> Result<Vec<u8>> {
        let path = dir.join(rel);
        let record = self
            .file(rel)
            .ok_or_else(|| Error::data(&path, 0, "file is not listed in the manifest"))?;
        let bytes = fs::read(&path)?;
        if sha256_hex(&bytes) != record.sha256 {
            return Err(Error::data(&path, 0, "checksum does not match the manifest"));
        }
        Ok(bytes)
    }
}

/// An output directory that records each file it writes. Safe to share
/// across threads writing disjoint files.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    gzip: bool,
    started_unix: u64,
    files: Mutex<BTreeMap<String, FileRecord>>,
    tasks: Mutex<Vec<TaskRecord>>,
}

impl OutputDir {
    pub fn create(root: &Path, gzip: bool) -> Result<Self> {
        fs::create_dir_all(root)?;
        let probe = root.join(".write-probe");
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            gzip,
            started_unix: unix_now(),
            files: Mutex::new(BTreeMap::new()),
            tasks: Mutex::new(Vec::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` at `rel` (forward slashes) and records its checksum.
    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<String> {
        write_atomic(&self.root.join(rel), bytes)?;
        let record = FileRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        };
        self.files.lock().expect("file list poisoned").insert(rel.to_string(), record);
        Ok(rel.to_string())
    }

    /// Summary tables; never compressed.
    pub fn write_csv(&self, rel: &str, csv: CsvText) -> Result<String> {
        self.write_bytes(rel, &csv.into_bytes())
    }

    /// Bulk tables; gzip-compressed (with `.gz` appended) when enabled.
    pub fn write_bulk_csv(&self, rel: &str, csv: CsvText) -> Result<String> {
        if self.gzip {
            let mut enc = GzEncoder::new(Vec::new(), Compression::default());
            enc.write_all(csv.as_str().as_bytes())?;
            self.write_bytes(&format!("{rel}.gz"), &enc.finish()?)
        } else {
            self.write_csv(rel, csv)
        }
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<String> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn task(&self, name: impl Into<String>, outcome: std::result::Result<(), String>) {
        let (status, message) = match outcome {
            Ok(()) => (TaskStatus::Ok, None),
            Err(m) => (TaskStatus::Failed, Some(m)),
        };
        self.tasks.lock().expect("task list poisoned").push(TaskRecord {
            name: name.into(),
            status,
            message,
        });
    }

    /// Writes the manifest last. Returns it for the caller's exit status.
    pub fn finish(self, command: &str, config_hash: &str) -> Result<RunManifest> {
        let mut tasks = self.tasks.into_inner().expect("task list poisoned");
        tasks.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = RunManifest {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            tasks,
            files: self.files.into_inner().expect("file list poisoned").into_values().collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.root.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(manifest)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_escape_and_render() {
        let mut c = CsvText::new(&["name", "value", "n"]);
        c.row().text("a,b").real(0.5).int(3).end();
        assert_eq!(c.as_str(), "name,value,n\n\"a,b\",5.0000000000000000e-1,3\n");
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), false).unwrap();
        out.write_bytes("a/x.txt", b"hello").unwrap();
        out.write_bytes("y.txt", b"world").unwrap();
        out.task("t", Ok(()));
        let m = out.finish("test", "abc").unwrap();
        assert_eq!(m.files.len(), 2);
        assert!(m.verify(dir.path()).is_empty());
        fs::write(dir.path().join("y.txt"), b"w0rld").unwrap();
        assert_eq!(m.verify(dir.path()), vec!["y.txt".to_string()]);
        assert!(m.read_verified(dir.path(), "y.txt").is_err());
        assert_eq!(m.read_verified(dir.path(), "a/x.txt").unwrap(), b"hello");
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn gzip_output_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), true).unwrap();
        let mut c = CsvText::new(&["v"]);
        c.row().real(1.5).end();
        let a = out.write_bulk_csv("s.csv", c.clone()).unwrap();
        let first = fs::read(dir.path().join(&a)).unwrap();
        out.write_bulk_csv("s.csv", c).unwrap();
        assert_eq!(a, "s.csv.gz");
        assert_eq!(fs::read(dir.path().join(&a)).unwrap(), first);
    }
}
