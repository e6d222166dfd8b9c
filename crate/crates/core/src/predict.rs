//! Label prediction for uncoded images and its evaluation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assist::{cosine, EmbeddingTable};
use crate::compare::{exact_match_ratio, pairwise_jaccard, truncate_labels, CompareError, MetricsReport};
use crate::exec::Exec;
use crate::model::{Labeling, TaxonPath};

/// Probability cut-off for extra zero-shot labels.
pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("missing embeddings for {0:?}")]
    MissingEmbedding(Vec<String>),
    #[error("no labeled images to match against")]
    EmptyLabeledSet,
    #[error("probability row for {0} is empty")]
    EmptyProbabilityRow(String),
    #[error("probability {value} for {uuid} at {path} is outside [0, 1]")]
    InvalidProbability { uuid: String, path: TaxonPath, value: f64 },
    #[error("leave-one-out needs at least 2 labeled images, got {0}")]
    NotEnoughData(usize),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

impl PredictError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MissingEmbedding(_) => "MissingEmbedding",
            Self::EmptyLabeledSet => "EmptyLabeledSet",
            Self::EmptyProbabilityRow(_) => "EmptyProbabilityRow",
            Self::InvalidProbability { .. } => "InvalidProbability",
            Self::NotEnoughData(_) => "NotEnoughData",
            Self::Compare(e) => e.code(),
        }
    }
}

/// Per-leaf probabilities for one image. Values need not sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub uuid: String,
    pub probs: BTreeMap<TaxonPath, f64>,
}

/// The path set plus every non-root prefix of each path.
pub fn ancestor_closure(paths: &BTreeSet<TaxonPath>) -> BTreeSet<TaxonPath> {
    paths.iter().flat_map(TaxonPath::prefixes).collect()
}

/// [`ancestor_closure`] applied to every image.
pub fn close_labeling(labels: &Labeling) -> Labeling {
    labels.iter().map(|(u, p)| (u.clone(), ancestor_closure(p))).collect()
}

struct Neighbors<'a> {
    /// Labeled uuids in ascending order with their vectors.
    candidates: Vec<(&'a String, &'a [f64])>,
}

impl<'a> Neighbors<'a> {
    fn new(labeled: &'a Labeling, emb: &'a EmbeddingTable) -> Result<Self, PredictError> {
        let missing = emb.missing(labeled.keys());
        if !missing.is_empty() {
            return Err(PredictError::MissingEmbedding(missing));
        }
        let mut candidates: Vec<_> = labeled
            .keys()
            .map(|u| (u, emb.get(u).expect("checked")))
            .collect();
        candidates.sort_by(|a, b| a.0.cmp(b.0));
        Ok(Self { candidates })
    }

    /// Most cosine-similar candidate other than `exclude`; ties go to the smallest uuid.
    fn nearest(&self, query: &[f64], exclude: Option<&str>) -> Option<&'a String> {
        let mut best: Option<(&String, f64)> = None;
        for &(u, v) in &self.candidates {
            if Some(u.as_str()) == exclude {
                continue;
            }
            let sim = cosine(query, v).expect("embedding table has one dimension");
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((u, sim));
            }
        }
        best.map(|(u, _)| u)
    }
}

/// Copies to each target the label set of its most similar labeled image.
pub fn similarity_predict(labeled: &Labeling, emb: &EmbeddingTable, targets: &[String]) -> Result<Labeling, PredictError> {
    similarity_predict_with(labeled, emb, targets, Exec::default())
}

pub fn similarity_predict_with(
    labeled: &Labeling,
    emb: &EmbeddingTable,
    targets: &[String],
    exec: Exec,
) -> Result<Labeling, PredictError> {
    if labeled.is_empty() {
        return Err(PredictError::EmptyLabeledSet);
    }
    let index = Neighbors::new(labeled, emb)?;
    let missing = emb.missing(targets);
    if !missing.is_empty() {
        return Err(PredictError::MissingEmbedding(missing));
    }
    let matches = exec.map(targets, |t| index.nearest(emb.get(t).expect("checked"), None));
    Ok(targets
        .iter()
        .zip(matches)
        .map(|(t, m)| (t.clone(), labeled[m.expect("labeled is non-empty")].clone()))
        .collect())
}

/// Argmax leaf plus every leaf at or above `threshold`, closed under ancestors.
pub fn zero_shot_predict(rows: &[ProbabilityRow], threshold: f64) -> Result<Labeling, PredictError> {
    let mut out = Labeling::new();
    for row in rows {
        let mut argmax: Option<(&TaxonPath, f64)> = None;
        let mut selected = BTreeSet::new();
        // BTreeMap iteration is ascending, so a strict `>` keeps the smallest path on ties.
        for (path, &p) in &row.probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(PredictError::InvalidProbability {
                    uuid: row.uuid.clone(),
                    path: path.clone(),
                    value: p,
                });
            }
            if argmax.is_none_or(|(_, best)| p > best) {
                argmax = Some((path, p));
            }
            if p >= threshold {
                selected.insert(path.clone());
            }
        }
        let (top, _) = argmax.ok_or_else(|| PredictError::EmptyProbabilityRow(row.uuid.clone()))?;
        selected.insert(top.clone());
        out.insert(row.uuid.clone(), ancestor_closure(&selected));
    }
    Ok(out)
}

/// Exact-match ratio and mean per-image Jaccard of `pred` against `gold`,
/// optionally after truncating both to `depth` segments.
pub fn evaluate(pred: &Labeling, gold: &Labeling, depth: Option<usize>) -> Result<MetricsReport, PredictError> {
    let (pred, gold) = match depth {
        Some(d) => (truncate_labels(pred, d)?, truncate_labels(gold, d)?),
        None => (pred.clone(), gold.clone()),
    };
    let pair = [&pred, &gold];
    Ok(MetricsReport {
        exact_match: exact_match_ratio(&pair)?,
        jaccard: pairwise_jaccard(&pair)?,
        node_iou: None,
        depth,
        n_images: gold.len(),
    })
}

/// Predicts every labeled image from all the others.
pub fn loo_predictions(labeled: &Labeling, emb: &EmbeddingTable, exec: Exec) -> Result<Labeling, PredictError> {
    if labeled.len() < 2 {
        return Err(PredictError::NotEnoughData(labeled.len()));
    }
    let index = Neighbors::new(labeled, emb)?;
    let uuids: Vec<&String> = labeled.keys().collect();
    let matches = exec.map(&uuids, |u| index.nearest(emb.get(u).expect("checked"), Some(u.as_str())));
    Ok(uuids
        .into_iter()
        .zip(matches)
        .map(|(u, m)| (u.clone(), labeled[m.expect("at least one other image")].clone()))
        .collect())
}

/// Leave-one-out evaluation of similarity matching.
pub fn loo_evaluate(labeled: &Labeling, emb: &EmbeddingTable, depth: Option<usize>) -> Result<MetricsReport, PredictError> {
    loo_evaluate_with(labeled, emb, depth, Exec::default())
}

pub fn loo_evaluate_with(
    labeled: &Labeling,
    emb: &EmbeddingTable,
    depth: Option<usize>,
    exec: Exec,
) -> Result<MetricsReport, PredictError> {
    let pred = loo_predictions(labeled, emb, exec)?;
    evaluate(&pred, labeled, depth)
}
