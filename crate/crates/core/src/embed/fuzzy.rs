//! Fuzzy simplicial set: per-point local connectivity (`rho`) and bandwidth
//! (`sigma`) calibrated so each point's membership mass equals `log2(k)`,
//! then symmetrized with the probabilistic t-conorm `a + b - ab`.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::Knn;

pub const SIGMA_ITERATIONS: usize = 64;
pub const SIGMA_BRACKET: (f64, f64) = (1e-8, 1e4);

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n_points: usize,
    /// Both directions of every undirected edge, sorted by `(i, j)`.
    pub edges: Vec<(usize, usize, f64)>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FuzzyGraph {
    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).fold(0.0, f64::max)
    }
}

#[inline]
fn membership(d: f64, rho: f64, sigma: f64) -> f64 {
    (-(d - rho).max(0.0) / sigma).exp()
}

/// Returns `(rho, sigma, directed weights)` where row `i` of the weights holds
/// `w_{j|i}` for the neighbours in `knn.indices` row `i`.
pub fn smooth_knn(knn: &Knn) -> (Vec<f64>, Vec<f64>, Array2<f64>) {
    let (n, k) = (knn.n_points(), knn.k());
    let target = (k as f64).log2();
    let mut rho = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    let mut weights = Array2::zeros((n, k));
    for i in 0..n {
        let dists = knn.distances.row(i);
        rho[i] = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
        let mass = |s: f64| dists.iter().map(|&d| membership(d, rho[i], s)).sum::<f64>();
        let (mut lo, mut hi) = SIGMA_BRACKET;
        for _ in 0..SIGMA_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        sigma[i] = 0.5 * (lo + hi);
        for (w, &d) in weights.row_mut(i).iter_mut().zip(dists.iter()) {
            *w = membership(d, rho[i], sigma[i]);
        }
    }
    (rho, sigma, weights)
}

pub fn fuzzy_simplicial_set(knn: &Knn) -> FuzzyGraph {
    let (rho, sigma, weights) = smooth_knn(knn);
    let n = knn.n_points();
    // (lo, hi) -> (w_{hi|lo}, w_{lo|hi})
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for i in 0..n {
        for (slot, &j) in knn.indices.row(i).iter().enumerate() {
            let w = weights[[i, slot]];
            if i == j || w <= 0.0 {
                continue;
            }
            if i < j {
                pairs.entry((i, j)).or_default().0 = w;
            } else {
                pairs.entry((j, i)).or_default().1 = w;
            }
        }
    }
    let mut edges = Vec::with_capacity(pairs.len() * 2);
    for (&(i, j), &(a, b)) in &pairs {
        let w = a + b - a * b;
        edges.push((i, j, w));
        edges.push((j, i, w));
    }
    edges.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    FuzzyGraph {
        n_points: n,
        edges,
        rho,
        sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::super::knn_exact;
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn single_neighbour_weight_is_one() {
        let data = array![[0.0], [1.0], [3.0], [7.0]];
        let knn = knn_exact(data.view(), 1).unwrap();
        let (_, _, w) = smooth_knn(&knn);
        assert!(w.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn mutual_pair_unions_to_one() {
        let data = array![[0.0], [1.0]];
        let g = fuzzy_simplicial_set(&knn_exact(data.view(), 1).unwrap());
        assert_eq!(g.edges, vec![(0, 1, 1.0), (1, 0, 1.0)]);
    }

    #[test]
    fn all_duplicate_neighbourhood_hits_bracket_floor() {
        let data = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let knn = knn_exact(data.view(), 3).unwrap();
        let (rho, sigma, w) = smooth_knn(&knn);
        assert!(rho.iter().all(|&r| r == 0.0));
        assert!(sigma.iter().all(|&s| s < 2.0 * SIGMA_BRACKET.0));
        assert!(w.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn membership_mass_matches_log2_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = Array2::from_shape_fn((150, 6), |_| rng.random_range(0.0..1.0));
        for k in [2usize, 5, 15, 30] {
            let knn = knn_exact(data.view(), k).unwrap();
            let (rho, sigma, _) = smooth_knn(&knn);
            for i in 0..150 {
                let mass: f64 = knn
                    .distances
                    .row(i)
                    .iter()
                    .map(|&d| (-(d - rho[i]).max(0.0) / sigma[i]).exp())
                    .sum();
                assert!((mass - (k as f64).log2()).abs() <= 1e-6, "k={k} i={i} mass={mass}");
            }
        }
    }

    #[test]
    fn union_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = Array2::from_shape_fn((120, 4), |_| rng.random_range(-3.0..3.0));
        let knn = knn_exact(data.view(), 10).unwrap();
        let (_, _, directed) = smooth_knn(&knn);
        let g = fuzzy_simplicial_set(&knn);
        let map: HashMap<(usize, usize), f64> = g.edges.iter().map(|&(i, j, w)| ((i, j), w)).collect();
        assert_eq!(map.len(), g.edges.len());
        for &(i, j, w) in &g.edges {
            assert_ne!(i, j);
            assert!(w > 0.0 && w <= 1.0);
            assert_eq!(map[&(j, i)].to_bits(), w.to_bits());
        }
        // union value against the directed memberships
        let dir = |i: usize, j: usize| {
            knn.indices
                .row(i)
                .iter()
                .position(|&x| x == j)
                .map_or(0.0, |s| directed[[i, s]])
        };
        for &(i, j, w) in g.edges.iter().take(200) {
            let (a, b) = (dir(i, j), dir(j, i));
            assert!((w - (a + b - a * b)).abs() < 1e-15);
        }
    }
}
