//! Comparison of several coders' sessions by path identity.
//!
//! Two taxa are the same taxon exactly when their [`TaxonPath`]s are equal.
//! [`union_merge`] exposes every disagreement, [`majority_merge`] resolves
//! them by strict-majority vote, and the agreement metrics score how far the
//! coders are apart.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::model::{CoderSession, Labeling, TaxonNode, TaxonPath, TaxonomyTree};
use crate::score::Score;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("no sessions given")]
    NoSessions,
    #[error("need at least {needed} inputs, got {got}")]
    NotEnoughInputs { needed: usize, got: usize },
    #[error("labelings cover different image sets (input {index} differs from input 0)")]
    ImageSetMismatch { index: usize },
    #[error("no images to compare")]
    EmptyImageSet,
    #[error("depth must be at least 1")]
    InvalidDepth,
    #[error("coder id {0:?} appears in more than one session")]
    DuplicateCoder(String),
}

impl CompareError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoSessions => "NoSessions",
            Self::NotEnoughInputs { .. } => "NotEnoughInputs",
            Self::ImageSetMismatch { .. } => "ImageSetMismatch",
            Self::EmptyImageSet => "EmptyImageSet",
            Self::InvalidDepth => "InvalidDepth",
            Self::DuplicateCoder(_) => "DuplicateCoder",
        }
    }
}

/// One node of the union tree with its discrepancy annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedNode {
    pub path: TaxonPath,
    /// Coders whose tree contains this path.
    pub creators: BTreeSet<String>,
    /// Per creator: images with a label at or below this node.
    pub assigned: BTreeMap<String, BTreeSet<String>>,
    /// Images assigned here by every creator.
    pub consensus_count: usize,
    /// Images assigned here by some creators but not all.
    pub partial_count: usize,
}

impl MergedNode {
    pub fn partial_images(&self) -> BTreeSet<String> {
        let union: BTreeSet<String> = self.assigned.values().flatten().cloned().collect();
        union
            .into_iter()
            .filter(|u| !self.assigned.values().all(|s| s.contains(u)))
            .collect()
    }
}

/// The union of all coders' trees, annotated with who created each node and
/// how their image assignments differ there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedMergedTree {
    pub coders: Vec<String>,
    pub tree: TaxonomyTree,
    /// In pre-order of `tree`.
    pub nodes: Vec<MergedNode>,
    pub warnings: Vec<String>,
}

impl AnnotatedMergedTree {
    pub fn node(&self, path: &TaxonPath) -> Option<&MergedNode> {
        self.nodes.iter().find(|n| &n.path == path)
    }
}

/// Output of [`majority_merge`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityMerge {
    pub tree: TaxonomyTree,
    /// Every image seen by any coder, in first-seen order. The set may be
    /// empty when no path reached a majority.
    pub labels: Labeling,
}

/// Agreement or prediction-quality figures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub exact_match: Score,
    pub jaccard: Score,
    pub node_iou: Option<Score>,
    pub depth: Option<usize>,
    pub n_images: usize,
}

fn check_sessions(sessions: &[CoderSession]) -> Result<(), CompareError> {
    if sessions.is_empty() {
        return Err(CompareError::NoSessions);
    }
    let mut seen = HashSet::new();
    for s in sessions {
        if !seen.insert(s.coder_id()) {
            return Err(CompareError::DuplicateCoder(s.coder_id().to_owned()));
        }
    }
    Ok(())
}

/// Union of the trees in first-seen order: nodes of the first tree in its
/// order, then nodes only later trees have, appended under their parents.
fn union_tree<'a>(trees: impl IntoIterator<Item = &'a TaxonomyTree>) -> TaxonomyTree {
    let mut union = TaxonomyTree::new();
    for tree in trees {
        for path in tree.paths() {
            if union.contains(&path) {
                continue;
            }
            let src = tree.get(&path).expect("path from tree");
            let parent = union.get_mut(&path.parent().expect("non-root")).expect("pre-order");
            let mut node = TaxonNode::with_origin(src.name.clone(), src.origin);
            node.note = src.note.clone();
            parent.children.push(node);
        }
    }
    union
}

/// Keeps only the nodes of `tree` accepted by `keep`. `keep` must be prefix-closed.
fn filter_tree(tree: &TaxonomyTree, keep: &dyn Fn(&TaxonPath) -> bool) -> TaxonomyTree {
    fn walk(node: &TaxonNode, prefix: &TaxonPath, keep: &dyn Fn(&TaxonPath) -> bool) -> Vec<TaxonNode> {
        node.children
            .iter()
            .filter_map(|c| {
                let p = prefix.child(c.name.clone());
                keep(&p).then(|| TaxonNode {
                    name: c.name.clone(),
                    children: walk(c, &p, keep),
                    origin: c.origin,
                    note: c.note.clone(),
                })
            })
            .collect()
    }
    let mut root = TaxonNode::new(tree.root().name.clone());
    root.children = walk(tree.root(), &TaxonPath::root(), keep);
    TaxonomyTree::from_root(root)
}

/// Images in first-seen order across sessions.
fn all_images(sessions: &[CoderSession]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in sessions {
        for u in s.labels().keys() {
            if seen.insert(u.as_str()) {
                out.push(u.clone());
            }
        }
    }
    out
}

/// Images loaded by every session, in the first session's order.
pub fn shared_images(sessions: &[CoderSession]) -> Vec<String> {
    let Some(first) = sessions.first() else {
        return Vec::new();
    };
    first
        .labels()
        .keys()
        .filter(|u| sessions.iter().all(|s| s.labels().contains_key(*u)))
        .cloned()
        .collect()
}

fn corpus_warnings(sessions: &[CoderSession]) -> Vec<String> {
    let shared = shared_images(sessions).len();
    sessions
        .iter()
        .filter(|s| s.image_count() != shared)
        .map(|s| {
            format!(
                "coder {} has {} images outside the {shared} shared by all coders",
                s.coder_id(),
                s.image_count() - shared
            )
        })
        .collect()
}

/// Union merge with creator lists and per-node assignment discrepancies.
pub fn union_merge(sessions: &[CoderSession]) -> Result<AnnotatedMergedTree, CompareError> {
    check_sessions(sessions)?;
    let tree = union_tree(sessions.iter().map(CoderSession::tree));

    // Per coder, every node path mapped to the images labeled at or below it.
    let per_coder: Vec<HashMap<TaxonPath, BTreeSet<String>>> = sessions
        .iter()
        .map(|s| {
            let mut at: HashMap<TaxonPath, BTreeSet<String>> = HashMap::new();
            for a in s.labels().values() {
                for p in &a.paths {
                    for prefix in p.prefixes() {
                        at.entry(prefix).or_default().insert(a.uuid.clone());
                    }
                }
            }
            at
        })
        .collect();

    let nodes = tree
        .paths()
        .into_iter()
        .map(|path| {
            let mut creators = BTreeSet::new();
            let mut assigned = BTreeMap::new();
            for (s, at) in sessions.iter().zip(&per_coder) {
                if s.tree().contains(&path) {
                    creators.insert(s.coder_id().to_owned());
                    assigned.insert(s.coder_id().to_owned(), at.get(&path).cloned().unwrap_or_default());
                }
            }
            let union: BTreeSet<&String> = assigned.values().flatten().collect();
            let consensus_count = union
                .iter()
                .filter(|u| assigned.values().all(|set| set.contains(**u)))
                .count();
            MergedNode {
                path,
                creators,
                partial_count: union.len() - consensus_count,
                consensus_count,
                assigned,
            }
        })
        .collect();

    Ok(AnnotatedMergedTree {
        coders: sessions.iter().map(|s| s.coder_id().to_owned()).collect(),
        tree,
        nodes,
        warnings: corpus_warnings(sessions),
    })
}

fn is_majority(count: usize, n: usize) -> bool {
    2 * count > n
}

/// Strict-majority merge of trees and labels.
pub fn majority_merge(sessions: &[CoderSession]) -> Result<MajorityMerge, CompareError> {
    check_sessions(sessions)?;
    let n = sessions.len();
    let mut node_votes: HashMap<TaxonPath, usize> = HashMap::new();
    for s in sessions {
        for p in s.tree().paths() {
            *node_votes.entry(p).or_default() += 1;
        }
    }
    let union = union_tree(sessions.iter().map(CoderSession::tree));
    let tree = filter_tree(&union, &|p| is_majority(node_votes.get(p).copied().unwrap_or(0), n));

    let labels = all_images(sessions)
        .into_iter()
        .map(|uuid| {
            let mut votes: BTreeMap<&TaxonPath, usize> = BTreeMap::new();
            for s in sessions {
                for p in s.paths_of(&uuid).into_iter().flatten() {
                    *votes.entry(p).or_default() += 1;
                }
            }
            let kept = votes
                .into_iter()
                .filter(|(_, c)| is_majority(*c, n))
                .map(|(p, _)| p.clone())
                .collect();
            (uuid, kept)
        })
        .collect();

    Ok(MajorityMerge { tree, labels })
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 1.
pub fn jaccard(a: &BTreeSet<TaxonPath>, b: &BTreeSet<TaxonPath>) -> Score {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        Score::one()
    } else {
        Score::new(inter, union)
    }
}

/// Verifies that every labeling has the same key set and returns the keys of the first.
fn shared_keys<'a>(labelings: &[&'a Labeling], needed: usize) -> Result<Vec<&'a String>, CompareError> {
    if labelings.len() < needed {
        return Err(CompareError::NotEnoughInputs {
            needed,
            got: labelings.len(),
        });
    }
    let first = labelings[0];
    for (index, l) in labelings.iter().enumerate().skip(1) {
        if l.len() != first.len() || !first.keys().all(|k| l.contains_key(k)) {
            return Err(CompareError::ImageSetMismatch { index });
        }
    }
    if first.is_empty() {
        return Err(CompareError::EmptyImageSet);
    }
    Ok(first.keys().collect())
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Fraction of images whose path sets are identical across all labelings.
pub fn exact_match_ratio(labelings: &[&Labeling]) -> Result<Score, CompareError> {
    let keys = shared_keys(labelings, 2)?;
    let agree = keys
        .iter()
        .filter(|k| labelings.iter().all(|l| l[**k] == labelings[0][**k]))
        .count();
    Ok(Score::new(agree, keys.len()))
}

/// Mean over coder pairs of the mean per-image Jaccard similarity.
pub fn pairwise_jaccard(labelings: &[&Labeling]) -> Result<Score, CompareError> {
    pairwise_jaccard_with(labelings, Exec::default())
}

pub fn pairwise_jaccard_with(labelings: &[&Labeling], exec: Exec) -> Result<Score, CompareError> {
    let keys = shared_keys(labelings, 2)?;
    let per_pair = exec.map(&pairs(labelings.len()), |&(i, j)| {
        Score::mean(keys.iter().map(|k| jaccard(&labelings[i][*k], &labelings[j][*k]))).expect("non-empty")
    });
    Ok(Score::mean(per_pair).expect("at least one pair"))
}

fn path_set(tree: &TaxonomyTree, depth: Option<usize>) -> BTreeSet<TaxonPath> {
    tree.paths()
        .into_iter()
        .filter(|p| depth.is_none_or(|d| p.len() <= d))
        .collect()
}

/// Mean over tree pairs of the IoU of their node path sets (root excluded).
pub fn node_iou(trees: &[&TaxonomyTree]) -> Result<Score, CompareError> {
    node_iou_at(trees, None)
}

/// [`node_iou`] restricted to nodes no deeper than `depth`.
pub fn node_iou_at(trees: &[&TaxonomyTree], depth: Option<usize>) -> Result<Score, CompareError> {
    if trees.len() < 2 {
        return Err(CompareError::NotEnoughInputs {
            needed: 2,
            got: trees.len(),
        });
    }
    let sets: Vec<_> = trees.iter().map(|t| path_set(t, depth)).collect();
    Ok(Score::mean(pairs(sets.len()).into_iter().map(|(i, j)| jaccard(&sets[i], &sets[j]))).expect("pairs"))
}

/// Images whose path sets differ between at least two sessions. An image
/// missing from a session counts as an empty set there.
pub fn dissensus_images(sessions: &[CoderSession]) -> Vec<String> {
    if sessions.len() < 2 {
        return Vec::new();
    }
    let empty = BTreeSet::new();
    all_images(sessions)
        .into_iter()
        .filter(|u| {
            let first = sessions[0].paths_of(u).unwrap_or(&empty);
            sessions[1..].iter().any(|s| s.paths_of(u).unwrap_or(&empty) != first)
        })
        .collect()
}

/// Images marked unsure by at least one session.
pub fn unsure_images(sessions: &[CoderSession]) -> Vec<String> {
    all_images(sessions)
        .into_iter()
        .filter(|u| sessions.iter().any(|s| s.is_unsure(u) == Some(true)))
        .collect()
}

/// Cuts every path to its first `depth` segments; duplicates collapse.
pub fn truncate_labels(labels: &Labeling, depth: usize) -> Result<Labeling, CompareError> {
    if depth == 0 {
        return Err(CompareError::InvalidDepth);
    }
    Ok(labels
        .iter()
        .map(|(u, paths)| (u.clone(), paths.iter().map(|p| p.truncate(depth)).collect()))
        .collect())
}

/// `labels` restricted to `keep`, in the order of `keep`.
pub fn restrict(labels: &Labeling, keep: &[String]) -> Labeling {
    keep.iter()
        .filter_map(|u| labels.get(u).map(|p| (u.clone(), p.clone())))
        .collect()
}

/// Match, pairwise Jaccard and node IoU across coders over their shared images.
pub fn agreement_report(sessions: &[CoderSession], depth: Option<usize>) -> Result<MetricsReport, CompareError> {
    check_sessions(sessions)?;
    if sessions.len() < 2 {
        return Err(CompareError::NotEnoughInputs {
            needed: 2,
            got: sessions.len(),
        });
    }
    let shared = shared_images(sessions);
    let mut labelings: Vec<Labeling> = sessions.iter().map(|s| restrict(&s.labeling(), &shared)).collect();
    if let Some(d) = depth {
        labelings = labelings.iter().map(|l| truncate_labels(l, d)).collect::<Result<_, _>>()?;
    }
    let refs: Vec<&Labeling> = labelings.iter().collect();
    let trees: Vec<&TaxonomyTree> = sessions.iter().map(CoderSession::tree).collect();
    Ok(MetricsReport {
        exact_match: exact_match_ratio(&refs)?,
        jaccard: pairwise_jaccard(&refs)?,
        node_iou: Some(node_iou_at(&trees, depth)?),
        depth,
        n_images: shared.len(),
    })
}
