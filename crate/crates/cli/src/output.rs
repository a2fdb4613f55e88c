//! Output handling: atomic file writes, content hashing, and the manifest
//! that ties a command's outputs back to the exact configuration that
//! produced them.
//!
//! Files are written to `<name>.tmp` and renamed into place, so a crash never
//! leaves a half-written artifact under the final name. The manifest lists
//! every file with its SHA-256 and row count; reruns with the same config
//! produce byte-identical files and therefore byte-identical manifests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// One entry in the manifest's file table.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    /// File name relative to the output directory.
    pub path: String,
    /// SHA-256 of the file contents.
    pub sha256: String,
    /// Data rows (excluding the header) for tabular files.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

/// Manifest written last, once every other file is in place.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Binary version.
    pub version: String,
    /// SHA-256 of the canonical `config.toml` written alongside.
    pub config_sha256: String,
    /// Root seed the run derived all randomness from.
    pub master_seed: u64,
    /// Every produced file, sorted by path.
    pub files: Vec<ManifestFile>,
}

/// Collects files for one command run and finishes with the manifest.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<ManifestFile>,
}

impl OutputSet {
    /// Creates the output directory (and parents) if needed.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Runtime(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes one text file atomically and records it for the manifest.
    pub fn write_text(
        &mut self,
        name: &str,
        contents: &str,
        rows: Option<usize>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        atomic_write(&path, contents.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(ManifestFile {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            rows,
        });
        Ok(())
    }

    /// Writes `manifest.json` covering everything written so far.
    pub fn finish(
        mut self,
        command: &str,
        config_sha256: &str,
        master_seed: u64,
    ) -> Result<(), CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_sha256.to_string(),
            master_seed,
            files: self.files,
        };
        let mut text =
            serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join("manifest.json");
        atomic_write(&path, text.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// Builds a CSV document from a header and preformatted rows.
pub struct CsvDoc {
    text: String,
    rows: usize,
}

impl CsvDoc {
    /// Starts a document with the given comma-joined header.
    pub fn new(header: &str) -> Self {
        let mut text = String::new();
        text.push_str(header);
        text.push('\n');
        Self { text, rows: 0 }
    }

    /// Appends one data row of comma-joined cells.
    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for cell in cells {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(cell.as_ref());
            first = false;
        }
        self.text.push('\n');
        self.rows += 1;
    }

    /// Final document text.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Number of data rows appended.
    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Shortest round-trip decimal form of a float, the same formatting used in
/// every CSV cell the tool writes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        // SHA-256("abc") from the FIPS 180-2 appendix.
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_doc_counts_rows_and_joins_cells() {
        let mut doc = CsvDoc::new("a,b");
        doc.row(["1", "2"]);
        doc.row([fmt_f64(0.5), fmt_f64(-3.25)]);
        assert_eq!(doc.rows(), 2);
        assert_eq!(doc.text(), "a,b\n1,2\n0.5,-3.25\n");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = std::env::temp_dir().join(format!("tagprint-out-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("probe.csv");
        atomic_write(&path, b"x\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"x\n");
        assert!(!dir.join("probe.csv.tmp").exists());
        let _ = fs::remove_dir_all(&dir);
    }
}
