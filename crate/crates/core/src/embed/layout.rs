//! Stochastic gradient layout: edges are sampled in proportion to their
//! membership weight and pull their endpoints together; each sample is
//! followed by negative samples drawn uniformly that push the head away.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingConfig, FuzzyGraph};

pub const GRADIENT_CLIP: f64 = 4.0;

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

#[inline]
fn squared_distance(coords: &[f64], i: usize, j: usize, dim: usize) -> f64 {
    let (a, b) = (&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn optimize_layout(
    graph: &FuzzyGraph,
    init: Array2<f64>,
    config: &EmbeddingConfig,
    a: f64,
    b: f64,
    n_epochs: usize,
) -> Array2<f64> {
    if n_epochs == 0 || graph.edges.is_empty() {
        return init;
    }
    let (n, dim) = init.dim();
    let mut coords: Vec<f64> = init.iter().copied().collect();

    let max_w = graph.max_weight();
    let epochs_per_sample: Vec<f64> = graph.edges.iter().map(|e| max_w / e.2).collect();
    let neg_rate = config.negative_sample_rate as f64;
    let epochs_per_negative: Vec<f64> = epochs_per_sample.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut grad = vec![0.0; dim];

    for epoch in 0..n_epochs {
        let e = epoch as f64;
        let alpha = config.learning_rate * (1.0 - e / n_epochs as f64);
        for (idx, &(head, tail, _)) in graph.edges.iter().enumerate() {
            if next_sample[idx] > e {
                continue;
            }

            let d2 = squared_distance(&coords, head, tail, dim);
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for d in 0..dim {
                grad[d] = clip(coeff * (coords[head * dim + d] - coords[tail * dim + d]));
                coords[head * dim + d] += grad[d] * alpha;
                coords[tail * dim + d] -= grad[d] * alpha;
            }
            next_sample[idx] += epochs_per_sample[idx];

            let n_neg = ((e - next_negative[idx]) / epochs_per_negative[idx]).max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == head {
                    continue;
                }
                let d2 = squared_distance(&coords, head, other, dim);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                if coeff > 0.0 {
                    for d in 0..dim {
                        let g = clip(coeff * (coords[head * dim + d] - coords[other * dim + d]));
                        coords[head * dim + d] += g * alpha;
                    }
                }
            }
            next_negative[idx] += n_neg as f64 * epochs_per_negative[idx];
        }
    }
    Array2::from_shape_vec((n, dim), coords).expect("shape preserved")
}
