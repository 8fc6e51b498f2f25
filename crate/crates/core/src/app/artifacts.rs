//! Artifact emission: CSV series, JSON-lines reports, snapshots, and the
//! run manifest.
//!
//! Every float that lands in an artifact goes through [`format_float`]
//! (17 significant digits), so a one-ulp regression anywhere changes the
//! bytes of some file.  The [`ArtifactSink`] records the SHA-256 and size of
//! everything it writes and turns that list into the manifest, which is
//! written last via an atomic rename: a directory containing `manifest.json`
//! is complete, and every file in it is listed there.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::scalar::Real;
use crate::spectral::{write_snapshot, SpectralField};

/// Artifact schema version, bumped whenever a file layout changes.
pub const ARTIFACT_VERSION: u32 = 1;

/// Render a float with 17 significant digits (round-trip exact for `f64`).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `serde_json` formatter that routes floats through [`format_float`].
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(format_float(value).as_bytes())
    }
}

/// Serialize a JSON value on one line with deterministic key order and
/// 17-digit floats.
pub fn json_line(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// One emitted file, as recorded in the manifest.
#[derive(Debug, Clone)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Completion status of one path, as recorded in the manifest.
#[derive(Debug, Clone)]
pub struct PathStatus {
    pub path: u64,
    pub completed: bool,
    pub steps: usize,
}

/// Collects artifacts for one command invocation and writes the manifest
/// over them.
pub struct ArtifactSink {
    dir: PathBuf,
    files: Vec<FileRecord>,
    report_lines: Vec<String>,
}

impl ArtifactSink {
    /// Create (or reuse) the output directory.
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            report_lines: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.push(FileRecord {
            name: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Write raw bytes under `name` and record them.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    /// Write a CSV file: header row plus pre-formatted value rows.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Write a field snapshot in the binary format and record it.
    pub fn write_field<T: Real>(&mut self, name: &str, field: &SpectralField<T>) -> Result<()> {
        let path = self.dir.join(name);
        write_snapshot(field, &path)?;
        let bytes = fs::read(&path)?;
        self.record(name, &bytes);
        Ok(())
    }

    /// Queue one JSON report line; all lines land in `reports.jsonl`.
    pub fn push_report(&mut self, value: &Value) {
        self.report_lines.push(json_line(value));
    }

    /// Flush queued reports (if any) and write the manifest atomically.
    ///
    /// The manifest lists every file written through this sink; partial
    /// output (a crash before this point) is detectable by its absence.
    pub fn finish(
        mut self,
        config_hash: &str,
        command: &str,
        exit_code: i32,
        path_status: &[PathStatus],
    ) -> Result<()> {
        if !self.report_lines.is_empty() {
            let mut text = String::new();
            for line in &self.report_lines {
                text.push_str(line);
                text.push('\n');
            }
            self.write_bytes("reports.jsonl", text.as_bytes())?;
        }

        let completed = path_status.iter().filter(|p| p.completed).count();
        let manifest = serde_json::json!({
            "artifact_version": ARTIFACT_VERSION,
            "command": command,
            "config_hash": config_hash,
            "exit_code": exit_code,
            "paths_total": path_status.len(),
            "paths_completed": completed,
            "path_status": path_status
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "path": p.path,
                        "completed": p.completed,
                        "steps": p.steps,
                    })
                })
                .collect::<Vec<_>>(),
            "files": self
                .files
                .iter()
                .map(|f| {
                    serde_json::json!({
                        "name": f.name,
                        "sha256": f.sha256,
                        "bytes": f.bytes,
                    })
                })
                .collect::<Vec<_>>(),
        });
        let mut text = json_line(&manifest);
        text.push('\n');

        let tmp = self.dir.join("manifest.json.tmp");
        let final_path = self.dir.join("manifest.json");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &final_path)?;
        Ok(())
    }
}
