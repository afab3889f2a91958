//! Pose featurization for running videos, plus pooled embedding, clustering
//! and per-animal cluster statistics.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{cluster_distribution, kmeans, ClusterConfig, ClusterError};
use crate::embed::{umap, EmbedDiagnostics, EmbedError, EmbeddingConfig};
use crate::interchange::{BBox, Detection, FrameRecord, PoseSet, VideoDir, NUM_KEYPOINTS};

pub const FEATURE_DIM: usize = 2 * NUM_KEYPOINTS;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.3;
pub const DEFAULT_MIN_VISIBLE: usize = 13;

#[derive(Debug, Error, PartialEq)]
pub enum GaitError {
    #[error("bounding box has zero diagonal")]
    DegenerateBBox,
    #[error("{n} pose features, need at least k = {k}")]
    TooFewFeatures { n: usize, k: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Which space k-means runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterSpace {
    #[default]
    Embedding,
    Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitConfig {
    pub min_confidence: f64,
    pub min_visible: usize,
    pub embed: EmbeddingConfig,
    pub cluster: ClusterConfig,
    pub cluster_space: ClusterSpace,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            min_visible: DEFAULT_MIN_VISIBLE,
            embed: EmbeddingConfig::gait(),
            cluster: ClusterConfig::default(),
            cluster_space: ClusterSpace::Embedding,
        }
    }
}

/// Normalized 34-value pose vector, `x0, y0, x1, y1, ...`.
///
/// Accepted keypoints are centred on their mean and divided by the bbox
/// diagonal; rejected ones sit at the mean (zero). Returns `None` when fewer
/// than `min_visible` keypoints reach `min_conf`.
pub fn pose_to_feature(
    pose: &PoseSet,
    bbox: &BBox,
    min_conf: f64,
    min_visible: usize,
) -> Result<Option<Vec<f64>>, GaitError> {
    let diag = bbox.diagonal();
    if !(diag > 0.0) {
        return Err(GaitError::DegenerateBBox);
    }
    let accepted: Vec<usize> = (0..NUM_KEYPOINTS)
        .filter(|&k| pose.points[k].confidence >= min_conf)
        .collect();
    if accepted.len() < min_visible || accepted.is_empty() {
        return Ok(None);
    }
    // Offsets from an accepted reference point are unchanged by a common
    // translation whenever the translated coordinates are exact, which keeps
    // the feature bit-identical under such shifts.
    let reference = pose.points[accepted[0]];
    let rel: Vec<(f64, f64)> = accepted
        .iter()
        .map(|&k| (pose.points[k].x - reference.x, pose.points[k].y - reference.y))
        .collect();
    let n = rel.len() as f64;
    let mx = rel.iter().map(|p| p.0).sum::<f64>() / n;
    let my = rel.iter().map(|p| p.1).sum::<f64>() / n;
    let mut out = vec![0.0; FEATURE_DIM];
    for (&k, &(x, y)) in accepted.iter().zip(&rel) {
        out[2 * k] = (x - mx) / diag;
        out[2 * k + 1] = (y - my) / diag;
    }
    Ok(Some(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitFeature {
    pub animal_id: String,
    pub video_id: String,
    pub frame_index: u64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub frames: usize,
    pub frames_without_pose: usize,
    pub poses_below_visibility: usize,
    pub features: usize,
}

/// The detection standing for an untracked animal: largest mask if any
/// detection has one, else highest score; ties go to the lowest index.
pub fn primary_detection(dets: &[&Detection]) -> Option<usize> {
    let with_mask = dets.iter().enumerate().filter_map(|(i, d)| d.mask_rle.as_ref().map(|m| (i, m.area())));
    let mut best: Option<(usize, u64)> = None;
    for (i, a) in with_mask {
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    if let Some((i, _)) = best {
        return Some(i);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in dets.iter().enumerate() {
        if best.is_none_or(|(_, s)| d.score > s) {
            best = Some((i, d.score));
        }
    }
    best.map(|(i, _)| i)
}

fn frame_features(
    video_id: &str,
    frame: &FrameRecord,
    cfg: &GaitConfig,
    stats: &mut ExtractionStats,
    out: &mut Vec<GaitFeature>,
) -> Result<(), GaitError> {
    stats.frames += 1;
    let tracked: Vec<&Detection> = frame.detections.iter().filter(|d| d.track_id.is_some()).collect();
    let untracked: Vec<&Detection> = frame.detections.iter().filter(|d| d.track_id.is_none()).collect();
    let mut chosen: Vec<(String, &Detection)> = tracked
        .iter()
        .map(|d| (format!("{video_id}#{}", d.track_id.expect("tracked")), *d))
        .collect();
    if let Some(i) = primary_detection(&untracked) {
        chosen.push((video_id.to_string(), untracked[i]));
    }
    let mut any_pose = false;
    for (animal_id, det) in chosen {
        let Some(pose) = &det.keypoints else { continue };
        any_pose = true;
        match pose_to_feature(pose, &det.bbox, cfg.min_confidence, cfg.min_visible)? {
            Some(vector) => {
                stats.features += 1;
                out.push(GaitFeature {
                    animal_id,
                    video_id: video_id.to_string(),
                    frame_index: frame.frame_index,
                    vector,
                });
            }
            None => stats.poses_below_visibility += 1,
        }
    }
    if !any_pose {
        stats.frames_without_pose += 1;
    }
    Ok(())
}

pub fn extract_features(videos: &[VideoDir], cfg: &GaitConfig) -> Result<(Vec<GaitFeature>, ExtractionStats), GaitError> {
    let mut stats = ExtractionStats::default();
    let mut out = Vec::new();
    for v in videos {
        for f in &v.frames {
            frame_features(v.video_id(), f, cfg, &mut stats, &mut out)?;
        }
    }
    Ok((out, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimalGait {
    pub n_features: usize,
    /// Count per cluster, length `k_used`.
    pub cluster_counts: Vec<usize>,
    pub dominant_cluster: usize,
    pub dominance_ratio: f64,
    /// Number of clusters the animal visits; one reading of a "unique pose"
    /// count.
    pub occupied_clusters: usize,
    /// Distinct feature vectors; the other reading.
    pub distinct_poses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSummary {
    pub n_features: usize,
    pub k_requested: usize,
    pub k_used: usize,
    pub cluster_space: ClusterSpace,
    pub extraction: ExtractionStats,
    pub embedding: EmbedDiagnostics,
    pub kmeans_iterations: usize,
    pub kmeans_converged: bool,
    pub inertia: f64,
    pub animals: BTreeMap<String, AnimalGait>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedFeature {
    pub animal_id: String,
    pub video_id: String,
    pub frame_index: u64,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitAnalysis {
    pub summary: GaitSummary,
    pub points: Vec<EmbeddedFeature>,
    pub warnings: Vec<String>,
}

fn distinct_rows<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> usize {
    rows.map(|r| r.iter().map(|v| v.to_bits()).collect::<Vec<u64>>())
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn analyze_running(videos: &[VideoDir], cfg: &GaitConfig) -> Result<GaitAnalysis, GaitError> {
    let (features, stats) = extract_features(videos, cfg)?;
    analyze_features(features, stats, cfg)
}

/// Embeds and clusters pooled features. When fewer distinct vectors than
/// `k` exist, `k` is lowered to that count so identical poses share one
/// cluster.
pub fn analyze_features(features: Vec<GaitFeature>, stats: ExtractionStats, cfg: &GaitConfig) -> Result<GaitAnalysis, GaitError> {
    let n = features.len();
    let k = cfg.cluster.k;
    if n < k || n < 2 {
        return Err(GaitError::TooFewFeatures { n, k: k.max(2) });
    }
    let mut warnings = Vec::new();
    let data = Array2::from_shape_fn((n, FEATURE_DIM), |(i, j)| features[i].vector[j]);
    let distinct = distinct_rows(features.iter().map(|f| &f.vector));
    let k_used = k.min(distinct);
    if k_used < k {
        warnings.push(format!("gait: only {distinct} distinct pose vectors, k lowered from {k} to {k_used}"));
    }
    let emb = umap(data.view(), &cfg.embed)?;
    if emb.diagnostics.neighbors_clamped {
        warnings.push(format!(
            "gait: n_neighbors lowered from {} to {}",
            cfg.embed.n_neighbors, emb.diagnostics.n_neighbors
        ));
    }
    if emb.diagnostics.spectral_fallback {
        warnings.push("gait: neighbour graph disconnected, random layout initialization used".into());
    }
    let ccfg = ClusterConfig { k: k_used, ..cfg.cluster.clone() };
    let clusters = match cfg.cluster_space {
        ClusterSpace::Embedding => kmeans(emb.embedding.view(), &ccfg)?,
        ClusterSpace::Pose => kmeans(data.view(), &ccfg)?,
    };
    let groups: Vec<&str> = features.iter().map(|f| f.animal_id.as_str()).collect();
    let dist = cluster_distribution(&clusters.labels, &groups, k_used)?;
    let mut per_animal: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for f in &features {
        per_animal.entry(&f.animal_id).or_default().push(&f.vector);
    }
    let animals = dist
        .into_iter()
        .map(|(id, d)| {
            (
                id.to_string(),
                AnimalGait {
                    n_features: d.size,
                    cluster_counts: d.counts,
                    dominant_cluster: d.dominant,
                    dominance_ratio: d.dominance_ratio,
                    occupied_clusters: d.occupied,
                    distinct_poses: distinct_rows(per_animal[id].iter().copied()),
                },
            )
        })
        .collect();
    let points = features
        .iter()
        .enumerate()
        .map(|(i, f)| EmbeddedFeature {
            animal_id: f.animal_id.clone(),
            video_id: f.video_id.clone(),
            frame_index: f.frame_index,
            x: emb.embedding[[i, 0]],
            y: emb.embedding[[i, 1]],
            cluster: clusters.labels[i],
        })
        .collect();
    Ok(GaitAnalysis {
        summary: GaitSummary {
            n_features: n,
            k_requested: k,
            k_used,
            cluster_space: cfg.cluster_space,
            extraction: stats,
            embedding: emb.diagnostics,
            kmeans_iterations: clusters.iterations,
            kmeans_converged: clusters.converged,
            inertia: clusters.inertia,
            animals,
        },
        points,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::{Keypoint, VideoManifest};
    use crate::synth::{gen_gait, GaitAnimalSpec, GaitSpec, SynthVideo};
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn pose_from(coords: &[(f64, f64)], conf: f64) -> PoseSet {
        PoseSet::new(std::array::from_fn(|k| Keypoint {
            x: coords[k].0,
            y: coords[k].1,
            confidence: conf,
        }))
    }

    fn as_dirs(videos: Vec<SynthVideo>) -> Vec<VideoDir> {
        videos
            .into_iter()
            .map(|v| VideoDir {
                dir: PathBuf::new(),
                manifest: v.manifest,
                frames: v.frames,
                imagery: None,
            })
            .collect()
    }

    #[test]
    fn points_at_centre_give_zero_vector() {
        let pose = pose_from(&[(50.0, 40.0); 17], 0.9);
        let f = pose_to_feature(&pose, &BBox::new(0.0, 0.0, 100.0, 80.0), 0.3, 13).unwrap().unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn visibility_floor_and_imputation() {
        let coords: Vec<(f64, f64)> = (0..17).map(|k| (k as f64 * 3.0, 100.0 - k as f64)).collect();
        let mut pose = pose_from(&coords, 0.9);
        for k in 0..5 {
            pose.points[k].confidence = 0.1;
        }
        let bbox = BBox::new(0.0, 0.0, 60.0, 80.0);
        assert_eq!(pose_to_feature(&pose, &bbox, 0.3, 13).unwrap(), None);
        pose.points[0].confidence = 0.3;
        let f = pose_to_feature(&pose, &bbox, 0.3, 13).unwrap().unwrap();
        for k in 1..5 {
            assert_eq!((f[2 * k], f[2 * k + 1]), (0.0, 0.0));
        }
        let sx: f64 = (0..17).map(|k| f[2 * k]).sum();
        assert!(sx.abs() < 1e-12);
        // the accepted-keypoint layout divided by the diagonal (100)
        assert!((f[2 * 16] - (48.0 - (0.0 + (5..17).map(|k| k as f64 * 3.0).sum::<f64>()) / 13.0) / 100.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_bbox() {
        let pose = pose_from(&[(1.0, 1.0); 17], 0.9);
        assert_eq!(
            pose_to_feature(&pose, &BBox::new(0.0, 0.0, 0.0, 0.0), 0.3, 13),
            Err(GaitError::DegenerateBBox)
        );
    }

    fn grid_coord() -> impl Strategy<Value = f64> {
        // multiples of 1/16 keep translated coordinates exactly representable
        (0i64..16_000).prop_map(|v| v as f64 / 16.0)
    }

    proptest! {
        #[test]
        fn translation_is_bit_exact(
            coords in proptest::collection::vec((grid_coord(), grid_coord()), 17),
            conf in proptest::collection::vec(0.0f64..1.0, 17),
            dx in -200i32..200, dy in -200i32..200,
            w in 1.0f64..300.0, h in 1.0f64..300.0,
        ) {
            let mut pose = pose_from(&coords, 0.0);
            for (p, c) in pose.points.iter_mut().zip(&conf) { p.confidence = *c; }
            let mut moved = pose.clone();
            for p in moved.points.iter_mut() { p.x += dx as f64; p.y += dy as f64; }
            let a = pose_to_feature(&pose, &BBox::new(0.0, 0.0, w, h), 0.3, 5).unwrap();
            let b = pose_to_feature(&moved, &BBox::new(dx as f64 + 500.0, dy as f64 + 500.0, w, h), 0.3, 5).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())),
                (None, None) => {}
                _ => prop_assert!(false, "acceptance changed under translation"),
            }
        }

        #[test]
        fn uniform_scaling(coords in proptest::collection::vec((0.0f64..500.0, 0.0f64..500.0), 17), s in 0.1f64..10.0) {
            let pose = pose_from(&coords, 0.9);
            let scaled = pose_from(&coords.iter().map(|&(x, y)| (x * s, y * s)).collect::<Vec<_>>(), 0.9);
            let a = pose_to_feature(&pose, &BBox::new(0.0, 0.0, 120.0, 90.0), 0.3, 13).unwrap().unwrap();
            let b = pose_to_feature(&scaled, &BBox::new(0.0, 0.0, 120.0 * s, 90.0 * s), 0.3, 13).unwrap().unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scaling_by_two_is_within_1e12() {
        let coords: Vec<(f64, f64)> = (0..17).map(|k| (10.0 + k as f64 * 7.3, 200.0 - k as f64 * 4.1)).collect();
        let pose = pose_from(&coords, 0.8);
        let scaled = pose_from(&coords.iter().map(|&(x, y)| (2.0 * x, 2.0 * y)).collect::<Vec<_>>(), 0.8);
        let a = pose_to_feature(&pose, &BBox::new(5.0, 5.0, 150.0, 210.0), 0.3, 13).unwrap().unwrap();
        let b = pose_to_feature(&scaled, &BBox::new(10.0, 10.0, 300.0, 420.0), 0.3, 13).unwrap().unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn identical_poses_occupy_one_cluster() {
        let (videos, _) = gen_gait(&GaitSpec::one_template_each(1, 40, 0.0, 9)).unwrap();
        let videos = as_dirs(videos);
        let out = analyze_running(&videos, &GaitConfig::default()).unwrap();
        let a = &out.summary.animals["gait_00"];
        assert_eq!(a.occupied_clusters, 1);
        assert_eq!(a.dominance_ratio, 1.0);
        assert_eq!(out.summary.k_used, 1);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn dropping_a_low_visibility_frame_leaves_others_untouched() {
        let (videos, _) = gen_gait(&GaitSpec::one_template_each(1, 6, 0.02, 2)).unwrap();
        let mut videos = as_dirs(videos);
        let cfg = GaitConfig::default();
        let (before, _) = extract_features(&videos, &cfg).unwrap();
        for p in videos[0].frames[2].detections[0].keypoints.as_mut().unwrap().points.iter_mut().take(8) {
            p.confidence = 0.0;
        }
        let (after, stats) = extract_features(&videos, &cfg).unwrap();
        assert_eq!(stats.poses_below_visibility, 1);
        let kept: Vec<&GaitFeature> = before.iter().filter(|f| f.frame_index != 2).collect();
        assert_eq!(kept.len(), after.len());
        for (a, b) in kept.iter().zip(&after) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn tracked_detections_become_separate_animals() {
        let m = VideoManifest {
            video_id: "v".into(),
            fps: 30.0,
            activity: crate::interchange::Activity::Running,
            view: None,
            social: None,
            frame_stride: 10,
            width: 500,
            height: 500,
        };
        let coords: Vec<(f64, f64)> = (0..17).map(|k| (100.0 + k as f64, 100.0 + (k * k) as f64 % 13.0)).collect();
        let det = |t: Option<u64>| Detection {
            track_id: t,
            bbox: BBox::new(90.0, 90.0, 40.0, 40.0),
            score: 0.9,
            keypoints: Some(pose_from(&coords, 0.9)),
            mask_rle: None,
        };
        let videos = vec![VideoDir {
            dir: PathBuf::new(),
            manifest: m,
            frames: vec![FrameRecord {
                video_id: "v".into(),
                frame_index: 0,
                detections: vec![det(Some(1)), det(Some(4)), det(None), det(None)],
            }],
            imagery: None,
        }];
        let (f, _) = extract_features(&videos, &GaitConfig::default()).unwrap();
        let ids: Vec<&str> = f.iter().map(|f| f.animal_id.as_str()).collect();
        assert_eq!(ids, vec!["v#1", "v#4", "v"]);
    }

    #[test]
    fn histogram_rows_conserve_frames() {
        let (videos, _) = gen_gait(&GaitSpec::one_template_each(3, 30, 0.02, 4)).unwrap();
        let out = analyze_running(&as_dirs(videos), &GaitConfig { cluster: ClusterConfig { k: 3, ..Default::default() }, ..Default::default() }).unwrap();
        for a in out.summary.animals.values() {
            assert_eq!(a.cluster_counts.iter().sum::<usize>(), a.n_features);
            assert_eq!(a.n_features, 30);
        }
    }

    #[test]
    fn disjoint_templates_separate() {
        let (videos, _) = gen_gait(&GaitSpec::one_template_each(2, 60, 0.02, 11)).unwrap();
        let cfg = GaitConfig {
            cluster: ClusterConfig { k: 2, ..Default::default() },
            ..Default::default()
        };
        let out = analyze_running(&as_dirs(videos), &cfg).unwrap();
        let a = &out.summary.animals["gait_00"];
        let b = &out.summary.animals["gait_01"];
        assert_ne!(a.dominant_cluster, b.dominant_cluster);
        assert!(a.dominance_ratio >= 0.9 && b.dominance_ratio >= 0.9);
    }

    #[test]
    fn template_mixture_dominant_share() {
        let spec = GaitSpec {
            animals: vec![GaitAnimalSpec {
                templates: vec![(0, 0.7), (1, 0.2), (2, 0.1)],
            }],
            n_templates: 3,
            frames_per_animal: 200,
            sigma: 0.02,
            seed: 21,
        };
        let (videos, _) = gen_gait(&spec).unwrap();
        let cfg = GaitConfig {
            cluster: ClusterConfig { k: 3, ..Default::default() },
            ..Default::default()
        };
        let out = analyze_running(&as_dirs(videos), &cfg).unwrap();
        let share = out.summary.animals["gait_00"].dominance_ratio;
        assert!((share - 0.7).abs() <= 0.1, "share {share}");
    }

    #[test]
    fn too_few_features() {
        let (videos, _) = gen_gait(&GaitSpec::one_template_each(1, 5, 0.02, 2)).unwrap();
        assert_eq!(
            analyze_running(&as_dirs(videos), &GaitConfig::default()).unwrap_err(),
            GaitError::TooFewFeatures { n: 5, k: 10 }
        );
    }
}
