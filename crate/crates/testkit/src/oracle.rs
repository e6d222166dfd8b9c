use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use taxa_core::model::{Labeling, TaxonPath};
use taxa_core::Score;

pub type Q = Ratio<i64>;

pub fn q(n: usize, d: usize) -> Q {
    Q::new(n as i64, d as i64)
}

pub fn score_is(score: &Score, expected: Q) -> bool {
    score.ratio() == &BigRational::new(BigInt::from(*expected.numer()), BigInt::from(*expected.denom()))
}

fn count_common(a: &BTreeSet<TaxonPath>, b: &BTreeSet<TaxonPath>) -> usize {
    a.iter().filter(|x| b.iter().any(|y| y == *x)).count()
}

/// `|A∩B| / |A∪B|`, 1 when both are empty.
pub fn jaccard(a: &BTreeSet<TaxonPath>, b: &BTreeSet<TaxonPath>) -> Q {
    let common = count_common(a, b);
    let union = a.len() + b.len() - common;
    if union == 0 {
        q(1, 1)
    } else {
        q(common, union)
    }
}

fn mean(values: Vec<Q>) -> Q {
    let n = values.len() as i64;
    values.into_iter().fold(Q::from_integer(0), |acc, v| acc + v) / n
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i < j {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn exact_match(labelings: &[&Labeling]) -> Q {
    let keys: Vec<&String> = labelings[0].keys().collect();
    let agree = keys
        .iter()
        .filter(|k| {
            pairs(labelings.len())
                .iter()
                .all(|&(i, j)| labelings[i][k.as_str()] == labelings[j][k.as_str()])
        })
        .count();
    q(agree, keys.len())
}

pub fn pairwise_jaccard(labelings: &[&Labeling]) -> Q {
    let keys: Vec<&String> = labelings[0].keys().collect();
    mean(
        pairs(labelings.len())
            .into_iter()
            .map(|(i, j)| {
                mean(
                    keys.iter()
                        .map(|k| jaccard(&labelings[i][k.as_str()], &labelings[j][k.as_str()]))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn node_iou(path_sets: &[BTreeSet<TaxonPath>]) -> Q {
    mean(
        pairs(path_sets.len())
            .into_iter()
            .map(|(i, j)| jaccard(&path_sets[i], &path_sets[j]))
            .collect(),
    )
}

/// Strict-majority vote over node sets and per-image label sets: an item is
/// kept when more coders have it than lack it.
pub fn majority(
    node_sets: &[BTreeSet<TaxonPath>],
    labelings: &[&Labeling],
) -> (BTreeSet<TaxonPath>, BTreeMap<String, BTreeSet<TaxonPath>>) {
    let n = node_sets.len();
    let candidates: BTreeSet<&TaxonPath> = node_sets.iter().flatten().collect();
    let nodes = candidates
        .into_iter()
        .filter(|p| {
            let have = node_sets.iter().filter(|s| s.contains(*p)).count();
            have > n - have
        })
        .cloned()
        .collect();
    let images: BTreeSet<&String> = labelings.iter().flat_map(|l| l.keys()).collect();
    let labels = images
        .into_iter()
        .map(|u| {
            let candidates: BTreeSet<&TaxonPath> = labelings.iter().filter_map(|l| l.get(u)).flatten().collect();
            let kept = candidates
                .into_iter()
                .filter(|p| {
                    let have = labelings.iter().filter(|l| l.get(u).is_some_and(|s| s.contains(*p))).count();
                    have > n - have
                })
                .cloned()
                .collect();
            (u.clone(), kept)
        })
        .collect();
    (nodes, labels)
}

/// Every non-empty prefix of every path.
pub fn closure(paths: &BTreeSet<TaxonPath>) -> BTreeSet<TaxonPath> {
    let mut out = BTreeSet::new();
    for p in paths {
        for k in 1..=p.segments().len() {
            out.insert(TaxonPath::new(p.segments()[..k].iter().cloned()));
        }
    }
    out
}

/// The zero-shot selection rule: every leaf at or above the threshold plus
/// the highest-probability leaf (smallest path among equal maxima), closed.
pub fn zero_shot(probs: &BTreeMap<TaxonPath, f64>, threshold: f64) -> BTreeSet<TaxonPath> {
    let top = probs.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax = probs.iter().filter(|(_, v)| **v == top).map(|(p, _)| p).min().unwrap();
    let mut picked: BTreeSet<TaxonPath> = probs
        .iter()
        .filter(|(_, v)| **v >= threshold)
        .map(|(p, _)| p.clone())
        .collect();
    picked.insert(argmax.clone());
    closure(&picked)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Member nearest to the members' mean, scanning all of them; ties go to the
/// earliest member in `members`.
pub fn representative(points: &[&[f64]], members: &[usize]) -> usize {
    let dim = points[members[0]].len();
    let mut centroid = vec![0.0; dim];
    for &m in members {
        for (c, x) in centroid.iter_mut().zip(points[m]) {
            *c += x;
        }
    }
    for c in &mut centroid {
        *c /= members.len() as f64;
    }
    let mut best = members[0];
    for &m in members {
        if dist2(points[m], &centroid) < dist2(points[best], &centroid) {
            best = m;
        }
    }
    best
}

/// Whether two labelings of items into groups induce the same partition,
/// regardless of group numbering.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
