//! Exact k-nearest-neighbour search by linear scan.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::EmbedError;

/// Per-point neighbours, nearest first, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub indices: Array2<usize>,
    pub distances: Array2<f64>,
}

impl Knn {
    pub fn n_points(&self) -> usize {
        self.indices.nrows()
    }

    pub fn k(&self) -> usize {
        self.indices.ncols()
    }
}

#[inline]
pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Rows are scanned in parallel; each row's result depends only on the data,
/// so the output is identical to a sequential scan.
pub fn knn_exact(data: ArrayView2<'_, f64>, k: usize) -> Result<Knn, EmbedError> {
    let n = data.nrows();
    if k == 0 || n <= k {
        return Err(EmbedError::TooFewPoints { n, k });
    }
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = data.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (euclidean(xi, data.row(j)), j))
                .collect();
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_distance_then_index);
                cand.truncate(k);
            }
            cand.sort_unstable_by(by_distance_then_index);
            cand
        })
        .collect();

    let mut indices = Array2::zeros((n, k));
    let mut distances = Array2::zeros((n, k));
    for (i, row) in rows.into_iter().enumerate() {
        for (slot, (d, j)) in row.into_iter().enumerate() {
            indices[[i, slot]] = j;
            distances[[i, slot]] = d;
        }
    }
    Ok(Knn { indices, distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points() {
        let data = array![[0.0], [1.0], [3.0]];
        let knn = knn_exact(data.view(), 1).unwrap();
        assert_eq!(knn.indices.column(0).to_vec(), vec![1, 0, 1]);
        assert_eq!(knn.distances.column(0).to_vec(), vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn duplicates_rank_by_index() {
        let data = array![[5.0, 5.0], [5.0, 5.0], [5.0, 5.0], [5.0, 5.0]];
        let knn = knn_exact(data.view(), 3).unwrap();
        assert_eq!(knn.indices.row(0).to_vec(), vec![1, 2, 3]);
        assert_eq!(knn.indices.row(2).to_vec(), vec![0, 1, 3]);
        assert!(knn.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn too_few_points() {
        let data = array![[0.0], [1.0]];
        assert_eq!(knn_exact(data.view(), 2), Err(EmbedError::TooFewPoints { n: 2, k: 2 }));
        assert!(knn_exact(data.view(), 0).is_err());
    }

    #[test]
    fn matches_all_pairs_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let (n, d, k) = (200, 10, 15);
        let data = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let knn = knn_exact(data.view(), k).unwrap();
        for i in 0..n {
            // full pairwise table, stable sort on distance keeps index order for ties
            let mut all: Vec<(f64, usize)> = Vec::new();
            for j in 0..n {
                if j != i {
                    let mut s = 0.0;
                    for t in 0..d {
                        let diff = data[[i, t]] - data[[j, t]];
                        s += diff * diff;
                    }
                    all.push((s.sqrt(), j));
                }
            }
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let want: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
            let want_d: Vec<f64> = all[..k].iter().map(|p| p.0).collect();
            assert_eq!(knn.indices.row(i).to_vec(), want);
            assert_eq!(knn.distances.row(i).to_vec(), want_d);
        }
    }
}
