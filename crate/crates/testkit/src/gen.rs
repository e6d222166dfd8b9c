use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use taxa_core::model::{
    CoderSession, LabelAssignment, Labeling, Op, Origin, PartSpec, SessionState, TaxonNode, TaxonPath, TaxonomyTree,
};

const NAMES: [&str; 6] = ["a", "b", "c", "map", "chart", "ungrouped"];
const PART_NAMES: [&str; 4] = ["p0", "p1", "p2", "ungrouped"];

fn pick_path<R: Rng>(rng: &mut R, paths: &[TaxonPath], root_weight: f64) -> TaxonPath {
    if paths.is_empty() || rng.random_bool(root_weight) {
        TaxonPath::root()
    } else {
        paths.choose(rng).unwrap().clone()
    }
}

/// A plausible next operator for `s`. Most are valid; some are not, on purpose.
pub fn random_op<R: Rng>(rng: &mut R, s: &CoderSession, corpus: &[String]) -> Op {
    let tree = s.tree();
    let paths = tree.paths();
    let leaves = tree.leaves();
    let loaded: Vec<&String> = s.labels().keys().collect();
    let name = |rng: &mut R| NAMES.choose(rng).unwrap().to_string();

    let roll = if loaded.is_empty() { 0 } else { rng.random_range(0..100) };
    match roll {
        0..8 => {
            let unloaded: Vec<&String> = corpus.iter().filter(|u| !s.labels().contains_key(*u)).collect();
            let n = rng.random_range(1..=4);
            let mut uuids: Vec<String> = unloaded.choose_multiple(rng, n).map(|u| (*u).clone()).collect();
            if uuids.is_empty() || rng.random_bool(0.05) {
                uuids.push(corpus.choose(rng).unwrap().clone());
            }
            Op::LoadBatch { uuids }
        }
        8..24 => Op::CreateTaxon {
            parent: pick_path(rng, &paths, 0.3),
            name: name(rng),
        },
        24..31 if !leaves.is_empty() => {
            let path = leaves.choose(rng).unwrap().clone();
            let mut holders: Vec<String> = s.state().holders(&path).into_iter().collect();
            holders.shuffle(rng);
            if rng.random_bool(0.05) {
                holders.pop();
            }
            let k = rng.random_range(1..=3);
            let mut parts: Vec<PartSpec> = PART_NAMES
                .choose_multiple(rng, k)
                .map(|n| PartSpec {
                    name: n.to_string(),
                    members: BTreeSet::new(),
                })
                .collect();
            for (i, u) in holders.into_iter().enumerate() {
                parts[i % k].members.insert(u);
            }
            let origin = if rng.random_bool(0.5) { Origin::MachineCluster } else { Origin::Manual };
            Op::ApplyPartition { path, parts, origin }
        }
        31..37 => Op::FlattenTaxon {
            path: pick_path(rng, &paths, 0.05),
        },
        37..42 if !leaves.is_empty() => Op::MergeTaxa {
            source: leaves.choose(rng).unwrap().clone(),
            target: leaves.choose(rng).unwrap().clone(),
        },
        42..48 => Op::MoveTaxon {
            path: pick_path(rng, &paths, 0.05),
            new_parent: pick_path(rng, &paths, 0.3),
        },
        48..53 => Op::RenameTaxon {
            path: pick_path(rng, &paths, 0.05),
            new_name: name(rng),
        },
        53..58 => Op::RemoveTaxon {
            path: pick_path(rng, &paths, 0.05),
        },
        58..80 => Op::LabelImage {
            uuid: loaded.choose(rng).unwrap().to_string(),
            leaf: if rng.random_bool(0.9) && !leaves.is_empty() {
                leaves.choose(rng).unwrap().clone()
            } else {
                pick_path(rng, &paths, 0.1)
            },
        },
        80..88 => {
            let uuid = loaded.choose(rng).unwrap().to_string();
            let own: Vec<TaxonPath> = s.paths_of(&uuid).unwrap().iter().cloned().collect();
            let leaf = if rng.random_bool(0.85) { own.choose(rng).unwrap().clone() } else { pick_path(rng, &paths, 0.1) };
            Op::UnlabelImage { uuid, leaf }
        }
        88..94 => Op::SetUnsure {
            uuid: loaded.choose(rng).unwrap().to_string(),
            unsure: rng.random_bool(0.5),
        },
        94..97 => Op::SetNote {
            path: pick_path(rng, &paths, 0.05),
            note: rng.random_bool(0.7).then(|| format!("note {}", rng.random_range(0..10))),
        },
        _ => Op::AddMemo {
            text: format!("memo {}", rng.random_range(0..100)),
        },
    }
}

/// Applies `n_ops` random operators, discarding rejected ones.
pub fn random_session<R: Rng>(rng: &mut R, coder: &str, corpus: &[String], n_ops: usize) -> CoderSession {
    let mut s = CoderSession::new(coder).unwrap();
    for _ in 0..n_ops {
        let op = random_op(rng, &s, corpus);
        let _ = s.apply(op);
    }
    s
}

/// A random tree with between 1 and `max_nodes - 1` non-root nodes named from `names`.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, names: &[&str]) -> TaxonomyTree {
    let mut tree = TaxonomyTree::new();
    let target = rng.random_range(1..max_nodes);
    let mut attempts = 0;
    while tree.len() < target && attempts < 50 {
        attempts += 1;
        let mut parents = tree.paths();
        parents.push(TaxonPath::root());
        let parent = parents.choose(rng).unwrap().clone();
        let name = *names.choose(rng).unwrap();
        let node = tree.get_mut(&parent).unwrap();
        if node.child(name).is_none() {
            node.children.push(TaxonNode::new(name));
        }
    }
    tree
}

/// Labels every image with one or two random leaves of `tree`.
pub fn random_leaf_labels<R: Rng>(rng: &mut R, tree: &TaxonomyTree, images: &[String]) -> Labeling {
    let leaves = tree.leaves();
    images
        .iter()
        .map(|u| {
            let n = rng.random_range(1..=2.min(leaves.len()));
            (u.clone(), leaves.choose_multiple(rng, n).cloned().collect())
        })
        .collect()
}

/// A session imported as a snapshot with the given tree and labels.
pub fn snapshot_session(coder: &str, tree: TaxonomyTree, labels: &Labeling, unsure: &[&str]) -> CoderSession {
    let state = SessionState {
        tree,
        labels: labels
            .iter()
            .map(|(u, p)| {
                (
                    u.clone(),
                    LabelAssignment {
                        uuid: u.clone(),
                        paths: p.clone(),
                        unsure: unsure.contains(&u.as_str()),
                    },
                )
            })
            .collect(),
        memos: Vec::new(),
    };
    CoderSession::from_snapshot(coder, coder, state).unwrap()
}

/// Random path sets over `universe` for each image. Sets may be empty.
pub fn random_labeling<R: Rng>(rng: &mut R, images: &[String], universe: &[TaxonPath]) -> Labeling {
    images
        .iter()
        .map(|u| {
            let set = universe.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
            (u.clone(), set)
        })
        .collect()
}

/// Every path of depth at most `depth` over the segment alphabet `names`.
pub fn path_universe(names: &[&str], depth: usize) -> Vec<TaxonPath> {
    let mut out = Vec::new();
    let mut frontier = vec![TaxonPath::root()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for p in &frontier {
            for n in names {
                next.push(p.child(*n));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `per_blob` Gaussian points around each center with standard deviation `sigma`.
/// Returns the points and the index of the blob each came from.
pub fn blobs<R: Rng>(rng: &mut R, centers: &[Vec<f64>], per_blob: usize, sigma: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push(c.iter().map(|x| x + noise.sample(rng)).collect());
            truth.push(b);
        }
    }
    (points, truth)
}
