//! Resting-posture silhouettes: standardized mask vectors, per-view
//! embeddings and group dispersion.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{kmeans, ClusterConfig, ClusterError};
use crate::embed::{umap, EmbedDiagnostics, EmbedError, EmbeddingConfig};
use crate::interchange::{decode_rle, BBox, BitGrid, InterchangeError, Social, VideoDir, View};
use crate::maskops::{crop, resize_nearest, PatchWindow, STANDARD_MASK_SIZE};

pub const SAMPLE_DIM: usize = STANDARD_MASK_SIZE * STANDARD_MASK_SIZE;

#[derive(Debug, Error)]
pub enum RestError {
    #[error("video {0} has no view label")]
    MissingViewLabel(String),
    #[error("video {0} has no social label")]
    MissingSocialLabel(String),
    #[error("{view} view has {n} samples, need more than n_neighbors = {needed}")]
    TooFewSamples { view: View, n: usize, needed: usize },
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestGroup {
    FrontHerd,
    SideHerd,
    FrontSingle,
    SideSingle,
}

impl RestGroup {
    pub fn of(view: View, social: Social) -> Self {
        match (view, social) {
            (View::Front, Social::Herd) => RestGroup::FrontHerd,
            (View::Side, Social::Herd) => RestGroup::SideHerd,
            (View::Front, Social::Single) => RestGroup::FrontSingle,
            (View::Side, Social::Single) => RestGroup::SideSingle,
        }
    }

    pub fn view(self) -> View {
        match self {
            RestGroup::FrontHerd | RestGroup::FrontSingle => View::Front,
            RestGroup::SideHerd | RestGroup::SideSingle => View::Side,
        }
    }

    pub fn social(self) -> Social {
        match self {
            RestGroup::FrontHerd | RestGroup::SideHerd => Social::Herd,
            RestGroup::FrontSingle | RestGroup::SideSingle => Social::Single,
        }
    }
}

impl std::fmt::Display for RestGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_{}", self.view(), self.social())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestSample {
    pub group: RestGroup,
    pub video_id: String,
    pub frame_index: u64,
    pub detection: usize,
    /// Row-major 64×64 silhouette, values 0 or 1.
    pub vector: Vec<f64>,
}

/// Mask cropped to its bbox pixel window and resized to the standard grid.
pub fn silhouette_vector(mask: &BitGrid, bbox: &BBox) -> Vec<f64> {
    let win = PatchWindow::from_bbox(bbox, mask.width(), mask.height());
    let patch = crop(mask, &win);
    let std = if patch.height() == 0 || patch.width() == 0 {
        BitGrid::new(STANDARD_MASK_SIZE, STANDARD_MASK_SIZE)
    } else {
        resize_nearest(&patch, STANDARD_MASK_SIZE, STANDARD_MASK_SIZE)
    };
    std.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// One sample per masked detection, in video, frame and detection order.
pub fn extract_rest_samples(videos: &[VideoDir]) -> Result<Vec<RestSample>, RestError> {
    let mut out = Vec::new();
    for v in videos {
        let id = v.video_id();
        let view = v.manifest.view.ok_or_else(|| RestError::MissingViewLabel(id.to_string()))?;
        let social = v.manifest.social.ok_or_else(|| RestError::MissingSocialLabel(id.to_string()))?;
        let group = RestGroup::of(view, social);
        for f in &v.frames {
            for (i, d) in f.detections.iter().enumerate() {
                let Some(rle) = &d.mask_rle else { continue };
                let grid = decode_rle(rle)?;
                out.push(RestSample {
                    group,
                    video_id: id.to_string(),
                    frame_index: f.frame_index,
                    detection: i,
                    vector: silhouette_vector(&grid, &d.bbox),
                });
            }
        }
    }
    Ok(out)
}

/// RMS Euclidean distance of the rows to their mean; 0 for no rows.
pub fn dispersion(points: ArrayView2<'_, f64>) -> f64 {
    let n = points.nrows();
    if n == 0 {
        return 0.0;
    }
    let mean = points.mean_axis(Axis(0)).expect("non-empty");
    let ss: f64 = points
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(mean.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    (ss / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSummary {
    pub n_samples: usize,
    pub embedding: EmbedDiagnostics,
    pub k_used: usize,
    pub kmeans_iterations: usize,
    pub cluster_sizes: Vec<usize>,
    /// Sample count and dispersion per social group present in this view.
    pub groups: BTreeMap<Social, GroupDispersion>,
    /// `dispersion(herd) / dispersion(single)`; absent unless both groups
    /// have samples and single dispersion is positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herd_single_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDispersion {
    pub n_samples: usize,
    pub dispersion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestSummary {
    pub n_samples: usize,
    pub dispersion_formula: String,
    pub views: BTreeMap<View, ViewSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample {
    pub group: RestGroup,
    pub video_id: String,
    pub frame_index: u64,
    pub detection: usize,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestAnalysis {
    pub summary: RestSummary,
    pub points: BTreeMap<View, Vec<EmbeddedSample>>,
    pub warnings: Vec<String>,
}

pub const DISPERSION_FORMULA: &str = "sqrt(mean_i |e_i - mean(e)|^2) over a group's 2-D embedding coordinates";

/// Embeds and clusters each view separately. Views without samples are
/// skipped; a view with samples but not more than `n_neighbors` of them is an
/// error.
pub fn analyze_resting(samples: &[RestSample], embed: &EmbeddingConfig, cluster: &ClusterConfig) -> Result<RestAnalysis, RestError> {
    let mut views = BTreeMap::new();
    let mut points = BTreeMap::new();
    let mut warnings = Vec::new();
    for view in [View::Front, View::Side] {
        let idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].group.view() == view).collect();
        let n = idx.len();
        if n == 0 {
            continue;
        }
        if n <= embed.n_neighbors {
            return Err(RestError::TooFewSamples {
                view,
                n,
                needed: embed.n_neighbors,
            });
        }
        let data = Array2::from_shape_fn((n, SAMPLE_DIM), |(r, c)| samples[idx[r]].vector[c]);
        let emb = umap(data.view(), embed)?;
        if emb.diagnostics.spectral_fallback {
            warnings.push(format!("rest: {view} neighbour graph disconnected, random layout initialization used"));
        }
        let k_used = cluster.k.min(n);
        let km = kmeans(emb.embedding.view(), &ClusterConfig { k: k_used, ..cluster.clone() })?;
        let mut sizes = vec![0; k_used];
        for &l in &km.labels {
            sizes[l] += 1;
        }
        let mut groups = BTreeMap::new();
        for social in [Social::Single, Social::Herd] {
            let rows: Vec<usize> = (0..n).filter(|&r| samples[idx[r]].group.social() == social).collect();
            if rows.is_empty() {
                warnings.push(format!("rest: {view} view has no {social} samples, ratio not defined"));
                continue;
            }
            let sub = emb.embedding.select(Axis(0), &rows);
            groups.insert(
                social,
                GroupDispersion {
                    n_samples: rows.len(),
                    dispersion: dispersion(sub.view()),
                },
            );
        }
        let ratio = match (groups.get(&Social::Herd), groups.get(&Social::Single)) {
            (Some(h), Some(s)) if s.dispersion > 0.0 => Some(h.dispersion / s.dispersion),
            _ => None,
        };
        points.insert(
            view,
            idx.iter()
                .enumerate()
                .map(|(r, &i)| EmbeddedSample {
                    group: samples[i].group,
                    video_id: samples[i].video_id.clone(),
                    frame_index: samples[i].frame_index,
                    detection: samples[i].detection,
                    x: emb.embedding[[r, 0]],
                    y: emb.embedding[[r, 1]],
                    cluster: km.labels[r],
                })
                .collect(),
        );
        views.insert(
            view,
            ViewSummary {
                n_samples: n,
                embedding: emb.diagnostics,
                k_used,
                kmeans_iterations: km.iterations,
                cluster_sizes: sizes,
                groups,
                herd_single_ratio: ratio,
            },
        );
    }
    Ok(RestAnalysis {
        summary: RestSummary {
            n_samples: samples.len(),
            dispersion_formula: DISPERSION_FORMULA.to_string(),
            views,
        },
        points,
        warnings,
    })
}
