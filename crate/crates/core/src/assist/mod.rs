//! Machine assistance for dividing taxa: embeddings, k-means clustering,
//! representative selection and caption cleanup.

mod caption;
mod cluster;
mod embed;
mod kmeans;

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::TaxonPath;

pub use caption::postprocess_caption;
pub use cluster::{cluster_taxon, cluster_taxon_with, cluster_count, ClusterPart, ClusterPartition};
pub use embed::{embed_file, fallback_embed, FALLBACK_DIM};
pub use kmeans::{kmeans, KMeans, KMeansFit, DEFAULT_MAX_ITER};

/// Captions keyed by uuid.
pub type CaptionTable = IndexMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssistError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("embedding for {0} has a NaN or infinite component")]
    NonFinite(String),
    #[error("duplicate embedding for {0}")]
    DuplicateImage(String),
    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("cluster count must be positive")]
    ZeroClusters,
    #[error("missing embeddings for {0:?}")]
    MissingEmbedding(Vec<String>),
    #[error("no taxon {0}")]
    NoSuchTaxon(TaxonPath),
    #[error("{0} is not a leaf")]
    NotALeaf(TaxonPath),
    #[error("{0} holds no images")]
    EmptyTaxon(TaxonPath),
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("cannot decode image: {0}")]
    Decode(String),
}

impl AssistError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DimMismatch { .. } => "DimMismatch",
            Self::ZeroDim => "ZeroDim",
            Self::NonFinite(_) => "NonFinite",
            Self::DuplicateImage(_) => "DuplicateImage",
            Self::TooManyClusters { .. } => "TooManyClusters",
            Self::ZeroClusters => "ZeroClusters",
            Self::MissingEmbedding(_) => "MissingEmbedding",
            Self::NoSuchTaxon(_) => "NoSuchTaxon",
            Self::NotALeaf(_) => "NotALeaf",
            Self::EmptyTaxon(_) => "EmptyTaxon",
            Self::EmptyImage => "EmptyImage",
            Self::Decode(_) => "DecodeError",
        }
    }
}

/// Fixed-dimension image embeddings keyed by uuid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, AssistError> {
        if dim == 0 {
            return Err(AssistError::ZeroDim);
        }
        Ok(Self {
            dim,
            vectors: IndexMap::new(),
        })
    }

    pub fn insert(&mut self, uuid: impl Into<String>, vector: Vec<f64>) -> Result<(), AssistError> {
        let uuid = uuid.into();
        if vector.len() != self.dim {
            return Err(AssistError::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(AssistError::NonFinite(uuid));
        }
        if self.vectors.contains_key(&uuid) {
            return Err(AssistError::DuplicateImage(uuid));
        }
        self.vectors.insert(uuid, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, uuid: &str) -> Option<&[f64]> {
        self.vectors.get(uuid).map(Vec::as_slice)
    }

    pub fn contains(&self, uuid: &str) -> bool {
        self.vectors.contains_key(uuid)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(u, v)| (u.as_str(), v.as_slice()))
    }

    /// Uuids from `uuids` that have no vector, in input order.
    pub fn missing<'a>(&self, uuids: impl IntoIterator<Item = &'a String>) -> Vec<String> {
        uuids.into_iter().filter(|u| !self.contains(u)).cloned().collect()
    }
}

/// Cosine similarity. A zero vector on either side gives 0.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, AssistError> {
    if u.len() != v.len() {
        return Err(AssistError::DimMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(AssistError::DimMismatch { .. })));
    }

    #[test]
    fn table_checks() {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a", vec![1.0, 2.0]).unwrap();
        assert!(matches!(t.insert("b", vec![1.0]), Err(AssistError::DimMismatch { .. })));
        assert_eq!(t.insert("a", vec![0.0, 0.0]), Err(AssistError::DuplicateImage("a".into())));
        assert_eq!(t.insert("c", vec![f64::NAN, 0.0]), Err(AssistError::NonFinite("c".into())));
        assert_eq!(EmbeddingTable::new(0), Err(AssistError::ZeroDim));
        assert_eq!(t.missing(&["a".to_string(), "z".to_string()]), ["z"]);
    }
}
