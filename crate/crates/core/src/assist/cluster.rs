use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::kmeans::KMeans;
use super::{postprocess_caption, squared_distance, AssistError, CaptionTable, EmbeddingTable};
use crate::exec::Exec;
use crate::model::{CoderSession, Op, Origin, PartSpec, TaxonPath};

/// One proposed sub-taxon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPart {
    pub name: String,
    pub members: BTreeSet<String>,
    /// Member closest to the cluster centroid.
    pub representative: String,
    /// Cleaned caption of the representative.
    pub caption: String,
}

/// A proposed division of a leaf taxon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub path: TaxonPath,
    pub seed: u64,
    pub parts: Vec<ClusterPart>,
}

impl ClusterPartition {
    pub fn part_specs(&self) -> Vec<PartSpec> {
        self.parts
            .iter()
            .map(|p| PartSpec {
                name: p.name.clone(),
                members: p.members.clone(),
            })
            .collect()
    }

    /// The operator that commits this partition as machine-made children.
    pub fn to_op(&self) -> Op {
        Op::ApplyPartition {
            path: self.path.clone(),
            parts: self.part_specs(),
            origin: Origin::MachineCluster,
        }
    }
}

/// `⌊√n⌋`, at least 1.
pub fn cluster_count(n: usize) -> usize {
    n.isqrt().max(1)
}

/// Proposes a division of the leaf at `path` into `⌊√n⌋` clusters of its images.
pub fn cluster_taxon(
    session: &CoderSession,
    path: &TaxonPath,
    embeddings: &EmbeddingTable,
    captions: &CaptionTable,
    seed: u64,
) -> Result<ClusterPartition, AssistError> {
    cluster_taxon_with(session, path, embeddings, captions, seed, Exec::default())
}

pub fn cluster_taxon_with(
    session: &CoderSession,
    path: &TaxonPath,
    embeddings: &EmbeddingTable,
    captions: &CaptionTable,
    seed: u64,
    exec: Exec,
) -> Result<ClusterPartition, AssistError> {
    let node = session
        .tree()
        .get(path)
        .filter(|_| !path.is_root())
        .ok_or_else(|| AssistError::NoSuchTaxon(path.clone()))?;
    if !node.is_leaf() {
        return Err(AssistError::NotALeaf(path.clone()));
    }
    // Sorted by uuid.
    let members: Vec<String> = session.state().holders(path).into_iter().collect();
    if members.is_empty() {
        return Err(AssistError::EmptyTaxon(path.clone()));
    }
    let missing = embeddings.missing(&members);
    if !missing.is_empty() {
        return Err(AssistError::MissingEmbedding(missing));
    }

    let vectors: Vec<&[f64]> = members.iter().map(|u| embeddings.get(u).expect("checked")).collect();
    let fit = KMeans::new(cluster_count(members.len()), seed).exec(exec).fit(&vectors)?;

    let parts = fit
        .clusters()
        .into_iter()
        .enumerate()
        .map(|(c, idx)| {
            let centroid = &fit.centroids[c];
            // Indices ascend with uuid, so a strict `<` keeps the smallest uuid on ties.
            let mut rep = idx[0];
            let mut best = squared_distance(vectors[rep], centroid);
            for &i in &idx[1..] {
                let d = squared_distance(vectors[i], centroid);
                if d < best {
                    rep = i;
                    best = d;
                }
            }
            let representative = members[rep].clone();
            ClusterPart {
                name: format!("cluster-{c}"),
                members: idx.iter().map(|&i| members[i].clone()).collect(),
                caption: captions
                    .get(&representative)
                    .map_or_else(|| "unknown".to_owned(), |c| postprocess_caption(c)),
                representative,
            }
        })
        .collect();

    Ok(ClusterPartition {
        path: path.clone(),
        seed,
        parts,
    })
}
