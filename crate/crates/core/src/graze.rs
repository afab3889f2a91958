//! Grazing activity from a nose-anchored ground patch with animal masks
//! removed, scored by excess green.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagery::{ImageryError, RgbImage};
use crate::interchange::{decode_rle, BBox, BitGrid, InterchangeError, PoseSet, Social, VideoDir};
use crate::maskops::{patch_minus_masks, PatchWindow};

#[derive(Debug, Error)]
pub enum GrazeError {
    #[error("nose keypoint confidence {confidence} below {threshold}")]
    LowConfidenceNose { confidence: f64, threshold: f64 },
    #[error("image is {found:?} but frame is {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("video {0} has no social label")]
    MissingSocialLabel(String),
    #[error("MissingImagery: video {0} has no imagery index")]
    MissingImagery(String),
    #[error("video {video}: {source}")]
    Imagery {
        video: String,
        #[source]
        source: ImageryError,
    },
    #[error("invalid graze parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenIndex {
    /// `2g - r - b`
    #[default]
    ExcessGreen,
    /// Plain `g`.
    GreenChannel,
}

impl GreenIndex {
    #[inline]
    pub fn eval(self, [r, g, b]: [f64; 3]) -> f64 {
        match self {
            GreenIndex::ExcessGreen => 2.0 * g - r - b,
            GreenIndex::GreenChannel => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazeConfig {
    /// Nose position in the 17-point scheme.
    pub nose_index: usize,
    pub min_nose_confidence: f64,
    /// Patch side as a fraction of the bbox diagonal.
    pub side_factor: f64,
    pub index: GreenIndex,
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    pub seed: u64,
}

impl Default for GrazeConfig {
    fn default() -> Self {
        Self {
            nose_index: 2,
            min_nose_confidence: 0.3,
            side_factor: 0.4,
            index: GreenIndex::ExcessGreen,
            bootstrap_resamples: 1000,
            confidence_level: 0.95,
            seed: 42,
        }
    }
}

/// Square window of side `round(side_factor · diagonal)` centred on the
/// nose, clipped to the frame.
pub fn grazing_patch(pose: &PoseSet, bbox: &BBox, width: usize, height: usize, cfg: &GrazeConfig) -> Result<PatchWindow, GrazeError> {
    let nose = pose.points[cfg.nose_index];
    if nose.confidence < cfg.min_nose_confidence {
        return Err(GrazeError::LowConfidenceNose {
            confidence: nose.confidence,
            threshold: cfg.min_nose_confidence,
        });
    }
    let side = (cfg.side_factor * bbox.diagonal()).round() as i64;
    let half = side as f64 / 2.0;
    let x0 = (nose.x - half).round() as i64;
    let y0 = (nose.y - half).round() as i64;
    Ok(PatchWindow::new(x0, y0, x0 + side, y0 + side).clip(width, height))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazeFrameSample {
    pub frame_index: u64,
    pub window: PatchWindow,
    pub keep_count: usize,
    /// `None` when every window pixel is covered by a mask.
    pub score: Option<f64>,
}

impl GrazeFrameSample {
    pub fn occluded(&self) -> bool {
        self.score.is_none()
    }
}

/// Mean index over window pixels not covered by any mask. `pixel(row, col)`
/// yields channels in `[0, 1]`.
pub fn green_score_with(
    frame_index: u64,
    pixel: impl Fn(usize, usize) -> [f64; 3],
    window: &PatchWindow,
    masks: &[BitGrid],
    index: GreenIndex,
) -> GrazeFrameSample {
    let keep = patch_minus_masks(window, masks);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, c) in keep.ones() {
        sum += index.eval(pixel(window.y0 as usize + r, window.x0 as usize + c));
        count += 1;
    }
    GrazeFrameSample {
        frame_index,
        window: *window,
        keep_count: count,
        score: (count > 0).then(|| sum / count as f64),
    }
}

pub fn green_score(
    frame_index: u64,
    image: &RgbImage,
    window: &PatchWindow,
    masks: &[BitGrid],
    index: GreenIndex,
) -> Result<GrazeFrameSample, GrazeError> {
    let dims = (image.height(), image.width());
    if let Some(m) = masks.iter().find(|m| m.dims() != dims) {
        return Err(GrazeError::DimensionMismatch {
            expected: m.dims(),
            found: dims,
        });
    }
    if window.x1 as usize > image.width() || window.y1 as usize > image.height() || window.x0 < 0 || window.y0 < 0 {
        return Err(GrazeError::DimensionMismatch {
            expected: (window.y1 as usize, window.x1 as usize),
            found: dims,
        });
    }
    Ok(green_score_with(frame_index, |r, c| image.rgb_unit(r, c), window, masks, index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoGraze {
    pub social: Social,
    /// `(frame_index, score)` for frames with at least one scored patch.
    pub series: Vec<(u64, f64)>,
    /// `score_t - score_{t-1}` over consecutive series entries.
    pub delta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity_index: Option<f64>,
    pub low_confidence_noses: usize,
    pub occluded_patches: usize,
    pub frames_without_patch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n_videos: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazeSummary {
    pub videos: BTreeMap<String, VideoGraze>,
    pub groups: BTreeMap<Social, GroupSummary>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Percentile bootstrap of the mean over `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(alpha), at(1.0 - alpha))
}

/// Scores every detection with a confident nose. A frame's score is the mean
/// of its non-occluded patch scores.
pub fn analyze_video(video: &VideoDir, cfg: &GrazeConfig) -> Result<VideoGraze, GrazeError> {
    let id = video.video_id().to_string();
    let social = video.manifest.social.ok_or_else(|| GrazeError::MissingSocialLabel(id.clone()))?;
    let imagery = video.imagery.as_ref().ok_or_else(|| GrazeError::MissingImagery(id.clone()))?;
    let (w, h) = (video.manifest.width as usize, video.manifest.height as usize);
    let mut out = VideoGraze {
        social,
        series: Vec::new(),
        delta: Vec::new(),
        activity_index: None,
        low_confidence_noses: 0,
        occluded_patches: 0,
        frames_without_patch: 0,
    };
    for frame in &video.frames {
        let mut windows = Vec::new();
        for det in &frame.detections {
            let Some(pose) = &det.keypoints else { continue };
            match grazing_patch(pose, &det.bbox, w, h, cfg) {
                Ok(win) if !win.is_empty() => windows.push(win),
                Ok(_) => {}
                Err(GrazeError::LowConfidenceNose { .. }) => out.low_confidence_noses += 1,
                Err(e) => return Err(e),
            }
        }
        if windows.is_empty() {
            out.frames_without_patch += 1;
            continue;
        }
        let masks = frame
            .detections
            .iter()
            .filter_map(|d| d.mask_rle.as_ref())
            .map(decode_rle)
            .collect::<Result<Vec<_>, _>>()?;
        let image = imagery.load(frame.frame_index).map_err(|source| GrazeError::Imagery {
            video: id.clone(),
            source,
        })?;
        if (image.width(), image.height()) != (w, h) {
            return Err(GrazeError::DimensionMismatch {
                expected: (h, w),
                found: (image.height(), image.width()),
            });
        }
        let mut scores = Vec::new();
        for win in &windows {
            let s = green_score(frame.frame_index, &image, win, &masks, cfg.index)?;
            match s.score {
                Some(v) => scores.push(v),
                None => out.occluded_patches += 1,
            }
        }
        if scores.is_empty() {
            out.frames_without_patch += 1;
        } else {
            out.series.push((frame.frame_index, mean(&scores)));
        }
    }
    out.delta = out.series.windows(2).map(|p| p[1].1 - p[0].1).collect();
    if !out.series.is_empty() {
        out.activity_index = Some(out.series.iter().map(|s| s.1).sum::<f64>() / out.series.len() as f64);
    }
    Ok(out)
}

pub fn analyze_grazing(videos: &[VideoDir], cfg: &GrazeConfig) -> Result<(GrazeSummary, Vec<String>), GrazeError> {
    if cfg.bootstrap_resamples == 0 || !(cfg.confidence_level > 0.0 && cfg.confidence_level < 1.0) {
        return Err(GrazeError::InvalidParameter(format!(
            "bootstrap_resamples={} confidence_level={}",
            cfg.bootstrap_resamples, cfg.confidence_level
        )));
    }
    let mut per_video = BTreeMap::new();
    let mut warnings = Vec::new();
    for v in videos {
        let g = analyze_video(v, cfg)?;
        if g.activity_index.is_none() {
            warnings.push(format!("graze: {} has no scorable frame", v.video_id()));
        }
        if g.low_confidence_noses > 0 || g.occluded_patches > 0 {
            warnings.push(format!(
                "graze: {} skipped {} low-confidence noses and {} fully occluded patches",
                v.video_id(),
                g.low_confidence_noses,
                g.occluded_patches
            ));
        }
        per_video.insert(v.video_id().to_string(), g);
    }
    let mut by_group: BTreeMap<Social, Vec<f64>> = BTreeMap::new();
    for g in per_video.values() {
        if let Some(a) = g.activity_index {
            by_group.entry(g.social).or_default().push(a);
        }
    }
    let groups = by_group
        .into_iter()
        .enumerate()
        .map(|(i, (social, vals))| {
            let (lo, hi) = bootstrap_ci(&vals, cfg.bootstrap_resamples, cfg.confidence_level, cfg.seed.wrapping_add(i as u64));
            (
                social,
                GroupSummary {
                    n_videos: vals.len(),
                    mean: mean(&vals),
                    ci_low: lo,
                    ci_high: hi,
                },
            )
        })
        .collect();
    Ok((
        GrazeSummary {
            videos: per_video,
            groups,
        },
        warnings,
    ))
}

/// `video_id,frame_index,score,delta` (delta empty on a video's first row).
pub fn write_graze_csv<W: Write>(summary: &GrazeSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "frame_index", "score", "delta"])?;
    for (id, v) in &summary.videos {
        for (i, (frame, score)) in v.series.iter().enumerate() {
            let delta = if i == 0 { String::new() } else { v.delta[i - 1].to_string() };
            w.write_record([id.clone(), frame.to_string(), score.to_string(), delta])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::{discover_videos, Keypoint};
    use crate::synth::{gen_grazing, write_synth_video, GrazingSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn pose_with_nose(x: f64, y: f64, conf: f64) -> PoseSet {
        let mut points = [Keypoint { x, y, confidence: 0.9 }; 17];
        points[2].confidence = conf;
        PoseSet::new(points)
    }

    #[test]
    fn patch_geometry() {
        let cfg = GrazeConfig::default();
        let bbox = BBox::new(0.0, 0.0, 60.0, 80.0);
        let w = grazing_patch(&pose_with_nose(100.0, 100.0, 0.9), &bbox, 200, 200, &cfg).unwrap();
        assert_eq!((w.width(), w.height()), (40, 40));
        assert_eq!((w.x0 + w.x1, w.y0 + w.y1), (200, 200));
        let corner = grazing_patch(&pose_with_nose(0.0, 0.0, 0.9), &bbox, 200, 200, &cfg).unwrap();
        assert_eq!((corner.x0, corner.y0, corner.x1, corner.y1), (0, 0, 20, 20));
        assert!(matches!(
            grazing_patch(&pose_with_nose(5.0, 5.0, 0.1), &bbox, 200, 200, &cfg),
            Err(GrazeError::LowConfidenceNose { .. })
        ));
    }

    #[test]
    fn analytic_exg() {
        let win = PatchWindow::new(0, 0, 4, 4);
        let green = RgbImage::new(4, 4, [0, 255, 0]);
        assert_eq!(green_score(0, &green, &win, &[], GreenIndex::ExcessGreen).unwrap().score, Some(2.0));
        for v in [0u8, 17, 128, 255] {
            let gray = RgbImage::new(4, 4, [v, v, v]);
            assert_eq!(green_score(0, &gray, &win, &[], GreenIndex::ExcessGreen).unwrap().score, Some(0.0));
        }
    }

    #[test]
    fn occluded_gray_half() {
        let mut img = RgbImage::new(8, 4, [90, 90, 90]);
        for r in 0..4 {
            for c in 0..4 {
                img.put_pixel(r, c, [0, 255, 0]);
            }
        }
        let mask = BitGrid::from_fn(4, 8, |_, c| c >= 4);
        let s = green_score(3, &img, &PatchWindow::new(0, 0, 8, 4), &[mask], GreenIndex::ExcessGreen).unwrap();
        assert_eq!(s.keep_count, 16);
        assert!((s.score.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn full_occlusion_is_not_zero() {
        let img = RgbImage::new(4, 4, [9, 9, 9]);
        let s = green_score(0, &img, &PatchWindow::new(0, 0, 4, 4), &[BitGrid::filled(4, 4)], GreenIndex::ExcessGreen).unwrap();
        assert!(s.occluded());
        assert_eq!(s.keep_count, 0);
    }

    #[test]
    fn mismatched_mask_dims() {
        let img = RgbImage::new(4, 4, [9, 9, 9]);
        assert!(matches!(
            green_score(0, &img, &PatchWindow::new(0, 0, 4, 4), &[BitGrid::new(5, 4)], GreenIndex::ExcessGreen),
            Err(GrazeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn green_channel_mode() {
        let img = RgbImage::new(2, 2, [255, 51, 0]);
        let s = green_score(0, &img, &PatchWindow::new(0, 0, 2, 2), &[], GreenIndex::GreenChannel).unwrap();
        assert_eq!(s.score, Some(0.2));
    }

    #[test]
    fn bootstrap_of_identical_values_is_degenerate() {
        assert_eq!(bootstrap_ci(&[0.7], 1000, 0.95, 1), (0.7, 0.7));
        let (lo, hi) = bootstrap_ci(&[1.0, 2.0, 3.0, 4.0], 1000, 0.95, 1);
        assert!(lo < 2.5 && hi > 2.5 && lo >= 1.0 && hi <= 4.0);
    }

    fn pixel_field(seed: u64, h: usize, w: usize) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..h * w).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
    }

    proptest! {
        #[test]
        fn exg_is_linear_in_channel_scale(seed in any::<u64>(), k in 0i32..4, alpha in 0.01f64..1.0) {
            let (h, w) = (6, 7);
            let px = pixel_field(seed, h, w);
            let win = PatchWindow::new(1, 1, 6, 5);
            let base = green_score_with(0, |r, c| px[r * w + c], &win, &[], GreenIndex::ExcessGreen).score.unwrap();
            // power-of-two scales are exact in floating point
            let p2 = 0.5f64.powi(k);
            let s = green_score_with(0, |r, c| px[r * w + c].map(|v| v * p2), &win, &[], GreenIndex::ExcessGreen).score.unwrap();
            prop_assert_eq!(s, base * p2);
            let s = green_score_with(0, |r, c| px[r * w + c].map(|v| v * alpha), &win, &[], GreenIndex::ExcessGreen).score.unwrap();
            prop_assert!((s - alpha * base).abs() <= 1e-12);
        }

        #[test]
        fn masking_non_green_never_lowers_score(seed in any::<u64>(), cut in 1usize..6) {
            let (h, w) = (6, 6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // green pixels score above every non-green one
            let green: Vec<bool> = (0..h * w).map(|_| rng.random_bool(0.5)).collect();
            let px: Vec<[f64; 3]> = green.iter().map(|&g| if g { [0.1, 0.9, 0.1] } else { [rng.random(), 0.2, rng.random()] }).collect();
            let win = PatchWindow::new(0, 0, 6, 6);
            let small = BitGrid::from_fn(h, w, |r, c| !green[r * w + c] && r < cut);
            let large = BitGrid::from_fn(h, w, |r, c| !green[r * w + c] && r < cut + 1);
            let f = |m: &BitGrid| green_score_with(0, |r, c| px[r * w + c], &win, std::slice::from_ref(m), GreenIndex::ExcessGreen).score;
            if let (Some(a), Some(b)) = (f(&small), f(&large)) {
                prop_assert!(b >= a - 1e-12);
            }
            let uniform = |r: usize, c: usize| { let _ = (r, c); [0.0, 1.0, 0.0] };
            let u0 = green_score_with(0, uniform, &win, &[], GreenIndex::ExcessGreen).score.unwrap();
            let u1 = green_score_with(0, uniform, &win, std::slice::from_ref(&large), GreenIndex::ExcessGreen).score;
            prop_assert!(u1.is_none_or(|v| v == u0));
        }
    }

    fn synth_videos(spec: &GrazingSpec) -> (tempfile::TempDir, Vec<VideoDir>, crate::synth::GrazingTruth) {
        let (videos, truth) = gen_grazing(spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for v in &videos {
            write_synth_video(dir.path(), v).unwrap();
        }
        let loaded = discover_videos(&[dir.path()]).unwrap();
        (dir, loaded, truth)
    }

    #[test]
    fn synthetic_scores_match_truth_and_direction() {
        let (_d, videos, truth) = synth_videos(&GrazingSpec::default());
        let (summary, _) = analyze_grazing(&videos, &GrazeConfig::default()).unwrap();
        for t in &truth.videos {
            let v = &summary.videos[&t.video_id];
            let got: Vec<f64> = v.series.iter().map(|s| s.1).collect();
            assert_eq!(got.len(), t.frame_scores.len());
            for (a, b) in got.iter().zip(&t.frame_scores) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(summary.groups[&Social::Single].mean > summary.groups[&Social::Herd].mean);
        // group mean is the plain mean of member indices
        for (social, g) in &summary.groups {
            let members: Vec<f64> = summary
                .videos
                .values()
                .filter(|v| v.social == *social)
                .filter_map(|v| v.activity_index)
                .collect();
            assert_eq!(g.mean, mean(&members));
        }
    }

    #[test]
    fn constant_imagery_gives_flat_series() {
        let spec = GrazingSpec {
            n_single: 1,
            n_herd: 0,
            column_jitter: 0,
            ..Default::default()
        };
        let (_d, videos, _) = synth_videos(&spec);
        let (summary, _) = analyze_grazing(&videos, &GrazeConfig::default()).unwrap();
        let v = summary.videos.values().next().unwrap();
        assert!(v.delta.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn identical_videos_in_both_groups() {
        let spec = GrazingSpec {
            n_single: 1,
            n_herd: 0,
            ..Default::default()
        };
        let (_d, mut videos, _) = synth_videos(&spec);
        let mut twin = videos[0].clone();
        twin.manifest.video_id = "twin".into();
        twin.manifest.social = Some(Social::Herd);
        videos.push(twin);
        let (s, _) = analyze_grazing(&videos, &GrazeConfig::default()).unwrap();
        let (a, b) = (&s.groups[&Social::Single], &s.groups[&Social::Herd]);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.ci_high - a.ci_low, 0.0);
        assert_eq!(b.ci_high - b.ci_low, 0.0);
    }

    #[test]
    fn missing_labels_and_imagery() {
        let (_d, videos, _) = synth_videos(&GrazingSpec { n_single: 1, n_herd: 0, n_frames: 2, ..Default::default() });
        let mut v = videos[0].clone();
        v.imagery = None;
        assert!(matches!(analyze_video(&v, &GrazeConfig::default()), Err(GrazeError::MissingImagery(_))));
        let mut v = videos[0].clone();
        v.manifest.social = None;
        assert!(matches!(analyze_video(&v, &GrazeConfig::default()), Err(GrazeError::MissingSocialLabel(_))));
    }
}
