//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::embed::{squared_distance, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, SeededRng};

pub const MAX_LLOYD_ITERATIONS: usize = 100;
/// Independent k-means++ restarts; the lowest-SSE run wins.
pub const RESTARTS: usize = 10;

/// Assignment of each input vector (by position) to one of `k` clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub assignments: Vec<usize>,
    pub centroids: Vec<EmbeddingVector>,
    pub nonempty_count: usize,
}

impl ClusterSet {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Positions assigned to `cluster`, in input order.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Non-empty clusters in increasing index order with their members.
    pub fn groups(&self) -> Vec<(usize, Vec<usize>)> {
        (0..self.k())
            .map(|c| (c, self.members(c)))
            .filter(|(_, m)| !m.is_empty())
            .collect()
    }

    /// Within-cluster sum of squared distances to the centroids.
    pub fn sse(&self, vectors: &[EmbeddingVector]) -> f64 {
        vectors
            .iter()
            .zip(&self.assignments)
            .map(|(v, &c)| v.squared_distance(&self.centroids[c]))
            .sum()
    }
}

/// One Lloyd run, with the SSE after every assignment step.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub clusters: ClusterSet,
    pub sse_history: Vec<f64>,
}

/// Clusters `vectors` into at most `k` groups. Deterministic for fixed inputs
/// and seed.
pub fn kmeans_cluster(vectors: &[EmbeddingVector], k: usize, seed: u64) -> Result<ClusterSet> {
    Ok(kmeans_runs(vectors, k, seed)?
        .into_iter()
        .map(|run| run.clusters)
        .fold(None::<(f64, ClusterSet)>, |best, c| {
            let sse = c.sse(vectors);
            match best {
                Some((b, _)) if b <= sse => best,
                _ => Some((sse, c)),
            }
        })
        .map(|(_, c)| c)
        .expect("at least one restart"))
}

/// Every restart of [`kmeans_cluster`], in the order they were run.
pub fn kmeans_runs(vectors: &[EmbeddingVector], k: usize, seed: u64) -> Result<Vec<KMeansRun>> {
    if k == 0 {
        return Err(Error::Argument("k must be ≥ 1".into()));
    }
    if k > vectors.len() {
        return Err(Error::Argument(format!(
            "k={k} exceeds the number of vectors ({})",
            vectors.len()
        )));
    }
    let dims = vectors[0].dims();
    if vectors.iter().any(|v| v.dims() != dims) {
        return Err(Error::Data("vectors have mixed dimensionality".into()));
    }
    let points: Vec<&[f64]> = vectors.iter().map(|v| v.values()).collect();
    let mut rng = seeded_rng(seed);
    Ok((0..RESTARTS).map(|_| lloyd(&points, k, &mut rng)).collect())
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_vec()];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, w) in nearest.iter().enumerate() {
                acc += w;
                if *w > 0.0 && target < acc {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave target == total; take the last weighted point.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|w| *w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = squared_distance(p, centroid);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn sse(points: &[&[f64]], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| squared_distance(p, &centroids[c]))
        .sum()
}

/// Gives every empty cluster the point farthest from its own centroid, taken
/// only from clusters that keep at least one other member.
fn repair_empty(points: &[&[f64]], assignment: &mut [usize], centroids: &mut [Vec<f64>]) {
    for empty in 0..centroids.len() {
        let mut sizes = vec![0usize; centroids.len()];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = assignment[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[c]);
            if d > 0.0 && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            centroids[empty] = points[i].to_vec();
            assignment[i] = empty;
        }
    }
}

fn update_means(points: &[&[f64]], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dims = points[0].len();
    let mut sums = vec![vec![0.0; dims]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    for (c, centroid) in centroids.iter_mut().enumerate() {
        if counts[c] > 0 {
            *centroid = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
    }
}

fn lloyd(points: &[&[f64]], k: usize, rng: &mut SeededRng) -> KMeansRun {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignment = assign(points, &centroids);
    let mut history = vec![sse(points, &assignment, &centroids)];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        repair_empty(points, &mut assignment, &mut centroids);
        update_means(points, &assignment, &mut centroids);
        let next = assign(points, &centroids);
        history.push(sse(points, &next, &centroids));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let mut counts = vec![0usize; k];
    for &c in &assignment {
        counts[c] += 1;
    }
    KMeansRun {
        clusters: ClusterSet {
            assignments: assignment,
            centroids: centroids
                .into_iter()
                .map(|c| EmbeddingVector::new(c).expect("means of finite points are finite"))
                .collect(),
            nonempty_count: counts.iter().filter(|c| **c > 0).count(),
        },
        sse_history: history,
    }
}
