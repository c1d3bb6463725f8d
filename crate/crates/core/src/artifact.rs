//! Versioned binary artifacts.
//!
//! Layout: 8-byte magic, `u32` format version (LE), 32-byte SHA-256 of the
//! canonical JSON of the producing configuration, then a bincode payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a {expected} artifact")]
    BadMagic { path: String, expected: String },
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    Version {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: configuration hash mismatch (artifact {found}, expected {expected})")]
    ConfigMismatch {
        path: String,
        found: String,
        expected: String,
    },
    #[error("{path}: corrupt payload: {message}")]
    Payload { path: String, message: String },
}

/// SHA-256 over the JSON encoding of `config`.
pub fn config_hash<C: Serialize>(config: &C) -> [u8; 32] {
    let json = serde_json::to_vec(config).expect("configuration serializes to JSON");
    Sha256::digest(&json).into()
}

pub fn hex(hash: &[u8]) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write<T: Serialize>(
    path: &Path,
    magic: &[u8; 8],
    version: u32,
    config_hash: &[u8; 32],
    payload: &T,
) -> Result<(), ArtifactError> {
    let io = |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(magic).map_err(io)?;
    w.write_all(&version.to_le_bytes()).map_err(io)?;
    w.write_all(config_hash).map_err(io)?;
    bincode::serialize_into(&mut w, payload).map_err(|e| ArtifactError::Payload {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    w.flush().map_err(io)
}

/// Reads an artifact and returns its payload with the embedded config hash.
pub fn read<T: DeserializeOwned>(
    path: &Path,
    magic: &[u8; 8],
    version: u32,
) -> Result<(T, [u8; 32]), ArtifactError> {
    let p = path.display().to_string();
    let io = |source| ArtifactError::Io {
        path: p.clone(),
        source,
    };
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut head = [0u8; 8];
    r.read_exact(&mut head).map_err(|_| ArtifactError::BadMagic {
        path: p.clone(),
        expected: String::from_utf8_lossy(magic).into_owned(),
    })?;
    if &head != magic {
        return Err(ArtifactError::BadMagic {
            path: p,
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v).map_err(io)?;
    let found = u32::from_le_bytes(v);
    if found != version {
        return Err(ArtifactError::Version {
            path: p,
            found,
            expected: version,
        });
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash).map_err(io)?;
    let payload = bincode::deserialize_from(&mut r).map_err(|e| ArtifactError::Payload {
        path: p.clone(),
        message: e.to_string(),
    })?;
    Ok((payload, hash))
}

pub fn check_hash(path: &Path, found: &[u8; 32], expected: &[u8; 32]) -> Result<(), ArtifactError> {
    if found == expected {
        Ok(())
    } else {
        Err(ArtifactError::ConfigMismatch {
            path: path.display().to_string(),
            found: hex(found),
            expected: hex(expected),
        })
    }
}
