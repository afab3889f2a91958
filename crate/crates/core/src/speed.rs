//! Centroid tracking of the largest mask per frame and area-normalized speed
//! profiles.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::{decode_rle, FrameRecord, InterchangeError, VideoDir, VideoManifest};
use crate::maskops::{centroid, largest_mask, Centroid, MaskError};

pub const DEFAULT_NORM_EXPONENT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SpeedError {
    #[error("no frame of {0} has a usable mask")]
    NoUsableFrames(String),
    #[error("speed needs at least 2 tracked frames, got {0}")]
    TooFewPoints(usize),
    #[error("invalid speed parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame_index: u64,
    pub centroid: Centroid,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub points: Vec<TrackPoint>,
    /// Kept frames with no usable mask.
    pub gaps: Vec<u64>,
}

/// Largest mask per frame, reduced to centroid and area. Frames without a
/// non-empty mask become gaps.
pub fn track_primary_centroids(frames: &[FrameRecord], manifest: &VideoManifest) -> Result<Track, SpeedError> {
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    for f in frames {
        let idx = match largest_mask(f) {
            Ok(i) => i,
            Err(MaskError::NoMasks) => {
                gaps.push(f.frame_index);
                continue;
            }
            Err(e) => unreachable!("largest_mask only reports missing masks: {e}"),
        };
        let rle = f.detections[idx].mask_rle.as_ref().expect("selected detection has a mask");
        let grid = decode_rle(rle)?;
        match centroid(&grid) {
            Ok(c) => points.push(TrackPoint {
                frame_index: f.frame_index,
                centroid: c,
                area: grid.count_ones() as f64,
            }),
            Err(_) => gaps.push(f.frame_index),
        }
    }
    if points.is_empty() {
        return Err(SpeedError::NoUsableFrames(manifest.video_id.clone()));
    }
    Ok(Track { points, gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedStep {
    pub from_frame: u64,
    pub to_frame: u64,
    /// Time of the step start.
    pub t_seconds: f64,
    pub raw_px_per_s: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terciles {
    pub commencement: f64,
    pub midpoint: f64,
    pub conclusion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub steps: Vec<SpeedStep>,
    pub reference_area: f64,
    pub exponent: f64,
    pub mean_raw: f64,
    pub mean_normalized: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terciles: Option<Terciles>,
}

impl SpeedProfile {
    pub fn raw(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.raw_px_per_s).collect()
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.normalized).collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Three contiguous windows of `n / 3` values; the remainder joins the last.
pub fn tercile_means(series: &[f64]) -> Option<Terciles> {
    let n = series.len();
    if n < 3 {
        return None;
    }
    let b = n / 3;
    Some(Terciles {
        commencement: mean(&series[..b]),
        midpoint: mean(&series[b..2 * b]),
        conclusion: mean(&series[2 * b..]),
    })
}

/// Raw speed `‖Δc‖ · fps / (Δ · stride)` between consecutive tracked frames,
/// normalized by `(A_ref / A_t)^exponent` with `A_t` the area at the step
/// start and `A_ref` the mean tracked area.
pub fn compute_speeds(track: &Track, fps: f64, frame_stride: u32, exponent: f64) -> Result<SpeedProfile, SpeedError> {
    let pts = &track.points;
    if pts.len() < 2 {
        return Err(SpeedError::TooFewPoints(pts.len()));
    }
    if !(fps > 0.0) || frame_stride == 0 || !exponent.is_finite() {
        return Err(SpeedError::InvalidParameter(format!(
            "fps={fps}, frame_stride={frame_stride}, exponent={exponent}"
        )));
    }
    let reference_area = pts.iter().map(|p| p.area).sum::<f64>() / pts.len() as f64;
    let stride = frame_stride as f64;
    let steps: Vec<SpeedStep> = pts
        .windows(2)
        .map(|w| {
            let delta = w[1].frame_index.abs_diff(w[0].frame_index) as f64;
            let raw = w[0].centroid.distance(&w[1].centroid) * fps / (delta * stride);
            SpeedStep {
                from_frame: w[0].frame_index,
                to_frame: w[1].frame_index,
                t_seconds: w[0].frame_index as f64 * stride / fps,
                raw_px_per_s: raw,
                normalized: raw * (reference_area / w[0].area).powf(exponent),
            }
        })
        .collect();
    let raw: Vec<f64> = steps.iter().map(|s| s.raw_px_per_s).collect();
    let norm: Vec<f64> = steps.iter().map(|s| s.normalized).collect();
    Ok(SpeedProfile {
        reference_area,
        exponent,
        mean_raw: mean(&raw),
        mean_normalized: mean(&norm),
        terciles: tercile_means(&norm),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSpeed {
    pub profile: SpeedProfile,
    pub tracked_frames: usize,
    pub gaps: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSummary {
    pub exponent: f64,
    pub videos: BTreeMap<String, VideoSpeed>,
}

/// Per-video profiles. Videos that cannot be tracked are reported in the
/// returned warnings and left out.
pub fn analyze_speed(videos: &[VideoDir], exponent: f64) -> Result<(SpeedSummary, Vec<String>), SpeedError> {
    let mut out = BTreeMap::new();
    let mut warnings = Vec::new();
    for v in videos {
        let track = match track_primary_centroids(&v.frames, &v.manifest) {
            Ok(t) => t,
            Err(SpeedError::NoUsableFrames(id)) => {
                warnings.push(format!("speed: {id} has no usable masks, skipped"));
                continue;
            }
            Err(e) => return Err(e),
        };
        if !track.gaps.is_empty() {
            warnings.push(format!("speed: {} has {} maskless frames bridged", v.video_id(), track.gaps.len()));
        }
        match compute_speeds(&track, v.manifest.fps, v.manifest.frame_stride, exponent) {
            Ok(profile) => {
                out.insert(
                    v.video_id().to_string(),
                    VideoSpeed {
                        profile,
                        tracked_frames: track.points.len(),
                        gaps: track.gaps,
                    },
                );
            }
            Err(SpeedError::TooFewPoints(n)) => warnings.push(format!("speed: {} has {n} tracked frame(s), skipped", v.video_id())),
            Err(e) => return Err(e),
        }
    }
    Ok((SpeedSummary { exponent, videos: out }, warnings))
}

/// `video_id,step_index,t_seconds,raw_px_per_s,normalized`
pub fn write_speed_csv<W: Write>(summary: &SpeedSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "step_index", "t_seconds", "raw_px_per_s", "normalized"])?;
    for (id, v) in &summary.videos {
        for (i, s) in v.profile.steps.iter().enumerate() {
            w.write_record([
                id.clone(),
                i.to_string(),
                s.t_seconds.to_string(),
                s.raw_px_per_s.to_string(),
                s.normalized.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
