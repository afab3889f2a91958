//! UMAP built from its parts: exact kNN, fuzzy simplicial set, low-dimensional
//! kernel fit, spectral initialization and SGD layout optimization.
//!
//! Every stage is deterministic for a fixed seed. The layout optimizer runs a
//! single sequential pass per epoch so two runs on one platform produce
//! bit-identical coordinates.

mod curve;
mod fuzzy;
mod knn;
mod layout;
mod spectral;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curve::{fit_curve, CURVE_SAMPLES, CURVE_SPAN};
pub use fuzzy::{fuzzy_simplicial_set, smooth_knn, FuzzyGraph, SIGMA_BRACKET, SIGMA_ITERATIONS};
pub use knn::{euclidean, knn_exact, Knn};
pub use layout::{optimize_layout, GRADIENT_CLIP};
pub use spectral::{connected_components, laplacian_eigenvectors, spectral_init, SpectralInit, INIT_SCALE, JITTER_SIGMA};

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("need more than {k} points for {k} neighbours, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("input contains non-finite values")]
    NonFiniteInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub n_components: usize,
    pub metric: Metric,
    /// `None` picks 500 epochs below 10 000 points and 200 above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_epochs: Option<usize>,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self::gait()
    }
}

impl EmbeddingConfig {
    /// Running-pose embedding: 20 neighbours; min_dist is not given for this
    /// analysis so the conventional 0.1 is used.
    pub fn gait() -> Self {
        Self {
            n_neighbors: 20,
            min_dist: 0.1,
            n_components: 2,
            metric: Metric::Euclidean,
            n_epochs: None,
            learning_rate: 1.0,
            negative_sample_rate: 5,
            seed: 42,
        }
    }

    /// Resting-silhouette embedding: 50 neighbours, min_dist 0.01.
    pub fn resting() -> Self {
        Self {
            n_neighbors: 50,
            min_dist: 0.01,
            ..Self::gait()
        }
    }

    pub fn effective_epochs(&self, n_points: usize) -> usize {
        self.n_epochs
            .unwrap_or(if n_points < 10_000 { 500 } else { 200 })
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        if self.n_neighbors == 0 {
            return bad("n_neighbors must be positive");
        }
        if !(self.min_dist > 0.0 && self.min_dist < 1.0) {
            return bad("min_dist must lie in (0, 1)");
        }
        if self.n_components == 0 {
            return bad("n_components must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.negative_sample_rate == 0 {
            return bad("negative_sample_rate must be positive");
        }
        Ok(())
    }
}

/// What the pipeline actually did, for the report's config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedDiagnostics {
    pub n_points: usize,
    pub distinct_points: usize,
    pub n_neighbors: usize,
    /// Set when `n_neighbors` was reduced to `n_points - 1`.
    pub neighbors_clamped: bool,
    pub spectral_fallback: bool,
    pub a: f64,
    pub b: f64,
    pub n_epochs: usize,
    pub n_edges: usize,
}

#[derive(Debug, Clone)]
pub struct UmapOutput {
    /// `n × n_components`
    pub embedding: Array2<f64>,
    pub diagnostics: EmbedDiagnostics,
}

/// Row index of the first occurrence of each distinct row (bitwise), and the
/// distinct-row slot of every input row.
fn distinct_rows(data: ArrayView2<'_, f64>) -> (Vec<usize>, Vec<usize>) {
    let mut seen: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut firsts = Vec::new();
    let slots = data
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                firsts.push(i);
                firsts.len() - 1
            })
        })
        .collect();
    (firsts, slots)
}

/// Duplicate input rows are embedded once and share their coordinates, so
/// identical inputs always land on identical outputs.
pub fn umap(data: ArrayView2<'_, f64>, config: &EmbeddingConfig) -> Result<UmapOutput, EmbedError> {
    config.validate()?;
    let n = data.nrows();
    if n < 2 {
        return Err(EmbedError::TooFewPoints { n, k: 1 });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFiniteInput);
    }
    let (firsts, slots) = distinct_rows(data);
    let m = firsts.len();
    let (a, b) = fit_curve(config.min_dist);
    let n_epochs = config.effective_epochs(n);
    if m == 1 {
        return Ok(UmapOutput {
            embedding: Array2::zeros((n, config.n_components)),
            diagnostics: EmbedDiagnostics {
                n_points: n,
                distinct_points: 1,
                n_neighbors: 0,
                neighbors_clamped: true,
                spectral_fallback: false,
                a,
                b,
                n_epochs: 0,
                n_edges: 0,
            },
        });
    }
    let unique = if m == n { data.to_owned() } else { data.select(Axis(0), &firsts) };
    let k = config.n_neighbors.min(m - 1);
    let knn = knn_exact(unique.view(), k)?;
    let graph = fuzzy_simplicial_set(&knn);
    let init = spectral_init(&graph, config.n_components, config.seed);
    let layout = optimize_layout(&graph, init.embedding, config, a, b, n_epochs);
    let embedding = if m == n { layout } else { layout.select(Axis(0), &slots) };
    Ok(UmapOutput {
        embedding,
        diagnostics: EmbedDiagnostics {
            n_points: n,
            distinct_points: m,
            n_neighbors: k,
            neighbors_clamped: k < config.n_neighbors,
            spectral_fallback: init.fallback,
            a,
            b,
            n_epochs,
            n_edges: graph.edges.len(),
        },
    })
}
