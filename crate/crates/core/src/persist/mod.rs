//! File formats: session documents, corpus metadata, the JSON Lines tables
//! (embeddings, captions, probabilities), labelings, and batch plans.
//!
//! Every document is UTF-8 JSON written canonically: object keys sorted,
//! two-space indentation, `\n` line endings and a trailing newline.

mod dataset;
mod labeling;
mod sample;
mod session_file;
mod tables;

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub use dataset::{load_dataset, parse_year};
pub use labeling::{
    encode_labeling, encode_majority, encode_union, read_labeling, LABELING_FORMAT, MERGE_FORMAT, UNION_FORMAT,
};
pub use sample::{sample_batches, BatchPlan};
pub use session_file::{load_session, save_session, SESSION_FORMAT};
pub use tables::{
    encode_captions, encode_embeddings, encode_probabilities, load_captions, load_embeddings, load_probabilities,
};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("format error: {0}")]
    Format(String),
    #[error("line {line}: dimension {got} differs from {expected}")]
    DimMismatch { line: usize, expected: usize, got: usize },
    #[error("duplicate image {0}")]
    DuplicateImage(String),
    #[error("need {needed} images, corpus has {available}")]
    NotEnoughImages { needed: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PersistError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Format(_) => "FormatError",
            Self::DimMismatch { .. } => "DimMismatch",
            Self::DuplicateImage(_) => "DuplicateImage",
            Self::NotEnoughImages { .. } => "NotEnoughImages",
            Self::InvalidArgument(_) => "InvalidArgument",
            Self::Io(_) => "IoError",
        }
    }

    pub(crate) fn format(msg: impl std::fmt::Display) -> Self {
        Self::Format(msg.to_string())
    }
}

/// Recursively sorts object keys.
fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonicalize(v))).collect::<Map<_, _>>())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Canonical pretty JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("in-memory documents serialize");
    let mut out = serde_json::to_string_pretty(&canonicalize(value)).expect("values serialize");
    out.push('\n');
    out
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_recursively() {
        let v = json!({"b": 1, "a": [{"z": 0, "y": 1}]});
        assert_eq!(
            to_canonical_json(&v),
            "{\n  \"a\": [\n    {\n      \"y\": 1,\n      \"z\": 0\n    }\n  ],\n  \"b\": 1\n}\n"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
