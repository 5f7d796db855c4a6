//! Run manifest and CSV emission.
//!
//! Every CSV starts with `# manifest_sha256=<hex>` followed by `# ` note lines,
//! then the table. Nothing time- or host-dependent is written, so reruns with
//! the same manifest are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::Failure;

pub struct Output {
    dir: PathBuf,
    hash: String,
}

/// Manifest text: tool, version and subcommand, then every resolved key in order.
pub fn manifest_text(subcommand: &str, settings: &Settings) -> String {
    let mut text = format!(
        "tool = dptransfer\nversion = {}\nsubcommand = {subcommand}\n",
        dptransfer_version()
    );
    for (k, v) in settings.iter() {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text
}

fn dptransfer_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Output {
    /// Creates the directory and writes `manifest.txt`.
    pub fn create(dir: &Path, subcommand: &str, settings: &Settings) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
        let text = manifest_text(subcommand, settings);
        let hash = sha256_hex(text.as_bytes());
        let path = dir.join("manifest.txt");
        fs::write(&path, &text).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(Self { dir: dir.to_path_buf(), hash })
    }

    /// Writes `name` with the manifest header and notes, the body produced by `body`.
    pub fn csv<F>(&self, name: &str, notes: &[String], body: F) -> Result<PathBuf, Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> dptransfer::Result<()>,
    {
        let mut buf = format!("# manifest_sha256={}\n", self.hash).into_bytes();
        for note in notes {
            for line in note.lines() {
                buf.extend_from_slice(format!("# {line}\n").as_bytes());
            }
        }
        body(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, buf).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
