//! K-means with k-means++ seeding, the adjusted Rand index and per-group
//! cluster histograms.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k-means needs at least k = {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("label arrays differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("no points to distribute over groups")]
    EmptyGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid shift, measured relative
    /// to the RMS distance of the data from its mean.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 10,
            max_iters: 300,
            tol: 1e-6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    /// `k × d`
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after each Lloyd update.
    pub inertia_history: Vec<f64>,
}

#[inline]
fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_plus_plus(data: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the accumulated sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    let mut centroids = Array2::zeros((k, data.ncols()));
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).assign(&data.row(i));
    }
    centroids
}

/// Nearest centroid per point, ties to the lowest centroid index.
fn assign(data: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let mut labels = Vec::with_capacity(data.nrows());
    let mut dists = Vec::with_capacity(data.nrows());
    for x in data.rows() {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (j, c) in centroids.rows().into_iter().enumerate() {
            let d = sq_dist(x, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        labels.push(best);
        dists.push(best_d);
    }
    (labels, dists)
}

fn means(data: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut sums = Array2::zeros((k, data.ncols()));
    let mut counts = vec![0usize; k];
    for (x, &l) in data.rows().into_iter().zip(labels) {
        let mut row = sums.row_mut(l);
        row += &x;
        counts[l] += 1;
    }
    for (mut row, &c) in sums.rows_mut().into_iter().zip(&counts) {
        if c > 0 {
            row /= c as f64;
        }
    }
    (sums, counts)
}

fn inertia_of(data: ArrayView2<'_, f64>, labels: &[usize], centroids: &Array2<f64>) -> f64 {
    data.rows()
        .into_iter()
        .zip(labels)
        .map(|(x, &l)| sq_dist(x, centroids.row(l)))
        .sum()
}

pub fn kmeans(data: ArrayView2<'_, f64>, config: &ClusterConfig) -> Result<ClusterResult, ClusterError> {
    let (n, _) = data.dim();
    let k = config.k;
    if k == 0 || config.max_iters == 0 || !(config.tol > 0.0) {
        return Err(ClusterError::InvalidConfig(format!(
            "k={}, max_iters={}, tol={} must all be positive",
            k, config.max_iters, config.tol
        )));
    }
    if n < k {
        return Err(ClusterError::TooFewPoints { n, k });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFiniteInput);
    }

    let mean = data.mean_axis(ndarray::Axis(0)).expect("n >= 1");
    let scale = (data.rows().into_iter().map(|x| sq_dist(x, mean.view())).sum::<f64>() / n as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = kmeans_plus_plus(data, k, &mut rng);
    let mut labels = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let (mut lab, mut dist) = assign(data, &centroids);
        let mut counts = vec![0usize; k];
        for &l in &lab {
            counts[l] += 1;
        }
        // an empty cluster claims the point farthest from its centroid
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[lab[i]] > 1)
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(p) = far {
                counts[lab[p]] -= 1;
                lab[p] = j;
                counts[j] = 1;
                dist[p] = 0.0;
            }
        }
        let (new_centroids, _) = means(data, &lab, k);
        let shift = centroids
            .rows()
            .into_iter()
            .zip(new_centroids.rows())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        labels = lab;
        history.push(inertia_of(data, &labels, &centroids));
        let relative = if scale > 0.0 { shift / scale } else { 0.0 };
        if relative < config.tol {
            converged = true;
            break;
        }
    }

    Ok(ClusterResult {
        inertia: *history.last().expect("at least one iteration"),
        labels,
        centroids,
        iterations,
        converged,
        inertia_history: history,
    })
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Chance-corrected agreement between two labelings, invariant to relabeling.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, ClusterError> {
    if a.len() != b.len() {
        return Err(ClusterError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // both labelings trivial (all-one-cluster or all-singletons)
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistribution {
    pub size: usize,
    /// Count per cluster id, length k.
    pub counts: Vec<usize>,
    /// Most populated cluster, ties to the lowest id.
    pub dominant: usize,
    pub dominance_ratio: f64,
    pub occupied: usize,
}

pub fn cluster_distribution<K: Ord + Clone>(
    labels: &[usize],
    groups: &[K],
    k: usize,
) -> Result<BTreeMap<K, GroupDistribution>, ClusterError> {
    if labels.len() != groups.len() {
        return Err(ClusterError::LengthMismatch(labels.len(), groups.len()));
    }
    if labels.is_empty() {
        return Err(ClusterError::EmptyGroup);
    }
    let mut counts: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (&l, g) in labels.iter().zip(groups) {
        if l >= k {
            return Err(ClusterError::LabelOutOfRange { label: l, k });
        }
        counts.entry(g.clone()).or_insert_with(|| vec![0; k])[l] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(g, counts)| {
            let size: usize = counts.iter().sum();
            let (dominant, &top) = counts
                .iter()
                .enumerate()
                .fold((0, &0), |best, (i, c)| if *c > *best.1 { (i, c) } else { best });
            let occupied = counts.iter().filter(|&&c| c > 0).count();
            (
                g,
                GroupDistribution {
                    size,
                    counts,
                    dominant,
                    dominance_ratio: top as f64 / size as f64,
                    occupied,
                },
            )
        })
        .collect())
}
