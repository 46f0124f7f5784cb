//! JSON sidecar next to every IMOE file: `<file>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use imo_core::EmbeddingSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, Error, Result};
use crate::imoe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoder {
    Original,
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// File name of the IMOE file, relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub source: String,
    pub encoder: Encoder,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io(path))?))
}

/// Writes `set` to `path` and its manifest to `<path>.json`.
pub fn write_with_manifest(set: &EmbeddingSet, path: &Path, source: &str, encoder: Encoder) -> Result<Manifest> {
    let bytes = imoe::encode(set)?;
    fs::write(path, &bytes).map_err(io(path))?;
    let manifest = Manifest {
        path: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(&bytes),
        source: source.to_owned(),
        encoder,
    };
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&side, json).map_err(io(&side))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io(&side))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: side, source })
}

/// Checks the file against its manifest hash; returns the manifest.
pub fn verify(path: &Path) -> Result<Manifest> {
    let manifest = read_manifest(path)?;
    let actual = sha256_file(path)?;
    if actual != manifest.sha256 {
        return Err(Error::HashMismatch {
            path: path.to_owned(),
            expected: manifest.sha256,
            actual,
        });
    }
    Ok(manifest)
}
