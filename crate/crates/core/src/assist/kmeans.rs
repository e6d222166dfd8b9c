use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{squared_distance, AssistError};
use crate::exec::Exec;

pub const DEFAULT_MAX_ITER: usize = 100;

/// Lloyd's k-means with k-means++ seeding.
///
/// Deterministic for a given seed and input order: point assignment ties go
/// to the lowest cluster index, and an empty cluster is reseeded with the
/// point farthest from its current centroid (taken from a cluster that can
/// spare it).
#[derive(Debug, Clone, Copy)]
pub struct KMeans {
    k: usize,
    seed: u64,
    max_iter: usize,
    exec: Exec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroid after each iteration.
    pub objective: Vec<f64>,
}

impl KMeansFit {
    /// Point indices per cluster, in cluster order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn iterations(&self) -> usize {
        self.objective.len()
    }
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            exec: Exec::default(),
        }
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter.max(1);
        self
    }

    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn fit(&self, points: &[&[f64]]) -> Result<KMeansFit, AssistError> {
        let n = points.len();
        if self.k == 0 {
            return Err(AssistError::ZeroClusters);
        }
        if self.k > n {
            return Err(AssistError::TooManyClusters { k: self.k, n });
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(AssistError::DimMismatch {
                expected: dim,
                got: p.len(),
            });
        }

        let mut centroids = self.init_plus_plus(points);
        let mut assignment = self.assign(points, &centroids);
        fix_empty(points, &mut assignment, &mut centroids);
        centroids = update(points, &assignment, &centroids);
        let mut objective = vec![cost(points, &assignment, &centroids)];

        while objective.len() < self.max_iter {
            let mut next = self.assign(points, &centroids);
            fix_empty(points, &mut next, &mut centroids);
            if next == assignment {
                break;
            }
            assignment = next;
            centroids = update(points, &assignment, &centroids);
            objective.push(cost(points, &assignment, &centroids));
        }

        Ok(KMeansFit {
            centroids,
            assignment,
            objective,
        })
    }

    fn init_plus_plus(&self, points: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = points.len();
        let mut chosen = vec![rng.random_range(0..n)];
        let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, points[chosen[0]])).collect();
        while chosen.len() < self.k {
            let total: f64 = d2.iter().sum();
            let next = if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, &d) in d2.iter().enumerate() {
                    acc += d;
                    if d > 0.0 && acc > target {
                        pick = Some(i);
                        break;
                    }
                }
                // Rounding can leave `acc` just short of `target`; fall back to the last positive weight.
                pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
            } else {
                // Every remaining point coincides with a center; take an unused index.
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.random_range(0..free.len())]
            };
            chosen.push(next);
            for (d, p) in d2.iter_mut().zip(points) {
                *d = d.min(squared_distance(p, points[next]));
            }
        }
        chosen.into_iter().map(|i| points[i].to_vec()).collect()
    }

    fn assign(&self, points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
        self.exec.map(points, |p| nearest(p, centroids).0)
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Gives every empty cluster the point farthest from its centroid, drawn from
/// clusters with more than one member.
fn fix_empty(points: &[&[f64]], assignment: &mut [usize], centroids: &mut [Vec<f64>]) {
    let mut counts = vec![0usize; centroids.len()];
    for &c in assignment.iter() {
        counts[c] += 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = assignment[i];
            if counts[c] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("k <= n leaves a cluster with a spare point");
        counts[assignment[i]] -= 1;
        assignment[i] = empty;
        counts[empty] = 1;
        centroids[empty] = points[i].to_vec();
    }
}

fn update(points: &[&[f64]], assignment: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = old[0].len();
    let mut sums = vec![vec![0.0; dim]; old.len()];
    let mut counts = vec![0usize; old.len()];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(old)
        .map(|((s, n), prev)| {
            if n == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|x| x / n as f64).collect()
            }
        })
        .collect()
}

fn cost(points: &[&[f64]], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| squared_distance(p, &centroids[c]))
        .sum()
}

/// Clusters uuid-keyed points into exactly `k` non-empty groups.
///
/// Points are ordered by uuid before clustering, so the result does not
/// depend on input order.
pub fn kmeans<'a>(
    points: impl IntoIterator<Item = (&'a str, &'a [f64])>,
    k: usize,
    seed: u64,
) -> Result<Vec<BTreeSet<String>>, AssistError> {
    let mut points: Vec<(&str, &[f64])> = points.into_iter().collect();
    points.sort_by(|a, b| a.0.cmp(b.0));
    let vectors: Vec<&[f64]> = points.iter().map(|(_, v)| *v).collect();
    let fit = KMeans::new(k, seed).fit(&vectors)?;
    Ok(fit
        .clusters()
        .into_iter()
        .map(|members| members.into_iter().map(|i| points[i].0.to_owned()).collect())
        .collect())
}
