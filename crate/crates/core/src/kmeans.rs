//! Approximate k-means: k-means++ seeding followed by Lloyd iterations, best
//! of several restarts.
//!
//! Every returned solution labels each point with its nearest returned
//! centroid (ties go to the lowest centroid index).

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::labels::ClusterAssignment;
use crate::matrix::Matrix;
use crate::rng::{derive_seed, SeededRng};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_lloyd_iters: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_lloyd_iters: 100,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// `k x d`
    pub centroids: Matrix,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, lowest index on ties.
pub fn nearest_centroid(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn assign(points: &Matrix, centroids: &Matrix) -> Vec<usize> {
    (0..points.rows())
        .map(|i| nearest_centroid(points.row(i), centroids).0)
        .collect()
}

fn seed_plus_plus(points: &Matrix, k: usize, rng: &mut SeededRng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave the walk one short
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

fn update_centroids(points: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &x) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            let inv = 1.0 / cnt as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    // empty clusters move to the point farthest from its own centroid
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let mut dist: Vec<f64> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| sq_dist(points.row(i), sums.row(l)))
            .collect();
        for c in empty {
            let mut far = 0;
            for i in 1..dist.len() {
                if dist[i] > dist[far] {
                    far = i;
                }
            }
            sums.row_mut(c).copy_from_slice(points.row(far));
            dist[far] = -1.0;
        }
    }
    sums
}

fn objective(points: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .sum()
}

fn lloyd(points: &Matrix, k: usize, max_iters: usize, rng: &mut SeededRng) -> (Vec<usize>, Matrix) {
    let mut centroids = seed_plus_plus(points, k, rng);
    let mut labels = assign(points, &centroids);
    for _ in 0..max_iters {
        let next_centroids = update_centroids(points, &labels, k);
        let next = assign(points, &next_centroids);
        centroids = next_centroids;
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, centroids)
}

/// k-means on the rows of `points`.
pub fn approx_kmeans(points: &Matrix, k: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let n = points.rows();
    if n == 0 {
        return arg_err("k-means needs at least one point");
    }
    if k == 0 || k > n {
        return arg_err(format!("k = {k} must lie in 1..={n}"));
    }
    if cfg.restarts == 0 {
        return arg_err("restarts must be at least 1");
    }
    let mut best: Option<(Vec<usize>, Matrix, f64)> = None;
    for restart in 0..cfg.restarts {
        let mut rng = SeededRng::new(derive_seed(cfg.seed, &[restart as u64]));
        let (labels, centroids) = lloyd(points, k, cfg.max_lloyd_iters, &mut rng);
        let obj = objective(points, &labels, &centroids);
        if best.as_ref().map_or(true, |b| obj < b.2) {
            best = Some((labels, centroids, obj));
        }
    }
    let (labels, centroids, objective) = best.expect("restarts >= 1");
    Ok(KMeansResult {
        assignment: ClusterAssignment::new(labels, k)?,
        centroids,
        objective,
    })
}
