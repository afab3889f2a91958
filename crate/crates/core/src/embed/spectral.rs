//! Spectral initialization from the symmetric normalized Laplacian
//! `L = I - D^-1/2 W D^-1/2`.
//!
//! The smallest eigenpairs of `L` are the largest of `(I + M) / 2` with
//! `M = D^-1/2 W D^-1/2`, whose spectrum lies in `[0, 1]`. They are found by
//! block subspace iteration with periodic Rayleigh-Ritz extraction, so only
//! sparse products with the graph are needed.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::FuzzyGraph;

pub const INIT_SCALE: f64 = 10.0;
pub const JITTER_SIGMA: f64 = 1e-4;

const MAX_ITERATIONS: usize = 2000;
const RITZ_EVERY: usize = 10;
const RESIDUAL_TOL: f64 = 1e-9;
const OVERSAMPLE: usize = 8;

#[derive(Debug, Clone)]
pub struct SpectralInit {
    pub embedding: Array2<f64>,
    /// The graph was disconnected (or too small) and a seeded uniform layout
    /// was used instead.
    pub fallback: bool,
}

/// Component id per point (ids assigned in order of first appearance).
pub fn connected_components(graph: &FuzzyGraph) -> Vec<usize> {
    let n = graph.n_points;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j, _) in &graph.edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut labels = vec![0; n];
    let mut next = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        labels[i] = ids[r];
    }
    labels
}

struct NormalizedAdjacency {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl NormalizedAdjacency {
    fn new(graph: &FuzzyGraph) -> Self {
        let mut degree = vec![0.0; graph.n_points];
        for &(i, _, w) in &graph.edges {
            degree[i] += w;
        }
        let edges = graph
            .edges
            .iter()
            .map(|&(i, j, w)| (i, j, w / (degree[i] * degree[j]).sqrt()))
            .collect();
        Self {
            n: graph.n_points,
            edges,
        }
    }

    /// `(I + M) x / 2` applied to every column.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = x * 0.5;
        let p = x.ncols();
        for &(i, j, w) in &self.edges {
            let hw = 0.5 * w;
            for c in 0..p {
                y[(i, c)] += hw * x[(j, c)];
            }
        }
        y
    }
}

fn orthonormalize(z: DMatrix<f64>) -> DMatrix<f64> {
    z.qr().q()
}

/// Rayleigh-Ritz on the span of `q`: returns Ritz values (descending), Ritz
/// vectors and the largest residual among the first `count`.
fn rayleigh_ritz(
    op: &NormalizedAdjacency,
    q: &DMatrix<f64>,
    count: usize,
) -> (Vec<f64>, DMatrix<f64>, f64) {
    let z = op.apply(q);
    let h = q.transpose() * &z;
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let p = q.ncols();
    let mut u = DMatrix::zeros(p, p);
    let mut theta = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &eig.eigenvectors.column(src));
        theta.push(eig.eigenvalues[src]);
    }
    let v = q * &u;
    let zu = z * &u;
    let mut worst = 0.0f64;
    for c in 0..count.min(p) {
        let r = zu.column(c) - v.column(c) * theta[c];
        worst = worst.max(r.norm());
    }
    (theta, v, worst)
}

/// The `count` smallest eigenpairs of the normalized Laplacian, eigenvalues
/// ascending. Returns `None` when `count` exceeds the number of points.
pub fn laplacian_eigenvectors(graph: &FuzzyGraph, count: usize, seed: u64) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = graph.n_points;
    if count == 0 || count > n {
        return None;
    }
    let op = NormalizedAdjacency::new(graph);
    let p = (count + OVERSAMPLE).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = orthonormalize(DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng)));
    let mut iter = 0;
    let (theta, v) = loop {
        iter += 1;
        if iter % RITZ_EVERY == 0 || iter >= MAX_ITERATIONS || p == n {
            let (theta, v, residual) = rayleigh_ritz(&op, &q, count);
            if residual < RESIDUAL_TOL || iter >= MAX_ITERATIONS || p == n {
                break (theta, v);
            }
            q = v;
        }
        q = orthonormalize(op.apply(&q));
    };
    debug_assert_eq!(op.n, n);
    let values = theta.iter().take(count).map(|t| 2.0 - 2.0 * t).collect();
    let vectors = v.columns(0, count).into_owned();
    Some((values, vectors))
}

fn random_layout(n: usize, n_components: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, n_components), |_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
}

/// Eigenvectors 2..=n_components+1 scaled to max-abs 10 plus N(0, 1e-4)
/// jitter; seeded uniform `[-10, 10]` when the graph is disconnected.
pub fn spectral_init(graph: &FuzzyGraph, n_components: usize, seed: u64) -> SpectralInit {
    let n = graph.n_points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
    let connected = n > 0 && connected_components(graph).iter().all(|&c| c == 0);
    let eig = if connected {
        laplacian_eigenvectors(graph, n_components + 1, seed)
    } else {
        None
    };
    let Some((_, vectors)) = eig else {
        return SpectralInit {
            embedding: random_layout(n, n_components, &mut rng),
            fallback: true,
        };
    };
    let max_abs = vectors
        .columns(1, n_components)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max_abs > 0.0 && max_abs.is_finite()) {
        return SpectralInit {
            embedding: random_layout(n, n_components, &mut rng),
            fallback: true,
        };
    }
    let expansion = INIT_SCALE / max_abs;
    let jitter = Normal::new(0.0, JITTER_SIGMA).expect("valid sigma");
    let embedding = Array2::from_shape_fn((n, n_components), |(i, c)| {
        vectors[(i, c + 1)] * expansion + jitter.sample(&mut rng)
    });
    SpectralInit {
        embedding,
        fallback: false,
    }
}
