use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Diagnostic, InterchangeError, RleMask, ValidationErrors};

pub const NUM_KEYPOINTS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Grazing,
    Running,
    Sitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Front,
    Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Social {
    Single,
    Herd,
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            View::Front => "front",
            View::Side => "side",
        })
    }
}

impl std::fmt::Display for Social {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Social::Single => "single",
            Social::Herd => "herd",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    pub fps: f64,
    pub activity: Activity,
    pub view: Option<View>,
    pub social: Option<Social>,
    /// Source frames advanced per kept frame.
    pub frame_stride: u32,
    pub width: u32,
    pub height: u32,
}

impl VideoManifest {
    /// Seconds between two consecutive kept frames.
    pub fn kept_frame_interval(&self) -> f64 {
        self.frame_stride as f64 / self.fps
    }
}

/// `(x, y, w, h)` in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct PoseSet {
    pub points: [Keypoint; NUM_KEYPOINTS],
}

impl PoseSet {
    pub fn new(points: [Keypoint; NUM_KEYPOINTS]) -> Self {
        Self { points }
    }
}

impl TryFrom<Vec<[f64; 3]>> for PoseSet {
    type Error = String;

    fn try_from(v: Vec<[f64; 3]>) -> Result<Self, Self::Error> {
        if v.len() != NUM_KEYPOINTS {
            return Err(format!("expected {NUM_KEYPOINTS} keypoints, got {}", v.len()));
        }
        let mut points = [Keypoint::default(); NUM_KEYPOINTS];
        for (p, [x, y, c]) in points.iter_mut().zip(v) {
            *p = Keypoint { x, y, confidence: c };
        }
        Ok(Self { points })
    }
}

impl From<PoseSet> for Vec<[f64; 3]> {
    fn from(p: PoseSet) -> Self {
        p.points.iter().map(|k| [k.x, k.y, k.confidence]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub track_id: Option<u64>,
    pub bbox: BBox,
    pub score: f64,
    pub keypoints: Option<PoseSet>,
    pub mask_rle: Option<RleMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub video_id: String,
    /// Index in the kept (downsampled) sequence.
    pub frame_index: u64,
    pub detections: Vec<Detection>,
}

pub fn validate_manifest(m: &VideoManifest) -> Result<(), InterchangeError> {
    let bad = |field: &str, detail: String| {
        Err(InterchangeError::InvalidManifest {
            field: field.into(),
            detail,
        })
    };
    if m.video_id.is_empty() {
        return bad("video_id", "must be nonempty".into());
    }
    if !(m.fps.is_finite() && m.fps > 0.0) {
        return bad("fps", format!("must be > 0, got {}", m.fps));
    }
    if m.frame_stride < 1 {
        return bad("frame_stride", "must be >= 1".into());
    }
    if m.width == 0 || m.height == 0 {
        return bad("width/height", format!("must be positive, got {}x{}", m.width, m.height));
    }
    Ok(())
}

/// Checks one frame against the manifest. `line` is only used for error
/// locations.
pub fn validate_frame(
    frame: &FrameRecord,
    manifest: &VideoManifest,
    line: usize,
) -> Vec<InterchangeError> {
    let mut errs = Vec::new();
    let mut violation = |field: String, detail: String| {
        errs.push(InterchangeError::InvariantViolation {
            line,
            frame_index: frame.frame_index,
            field,
            detail,
        })
    };
    let (width, height) = (manifest.width as f64, manifest.height as f64);
    for (i, det) in frame.detections.iter().enumerate() {
        let b = det.bbox;
        if ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) {
            violation(format!("detections[{i}].bbox"), "non-finite coordinate".into());
        } else if b.x < 0.0 || b.y < 0.0 {
            violation(format!("detections[{i}].bbox"), format!("negative origin ({}, {})", b.x, b.y));
        } else if b.w <= 0.0 || b.h <= 0.0 {
            violation(format!("detections[{i}].bbox"), format!("non-positive size {}x{}", b.w, b.h));
        } else if b.x + b.w > width || b.y + b.h > height {
            violation(
                format!("detections[{i}].bbox"),
                format!(
                    "extends to ({}, {}) beyond frame {}x{}",
                    b.x + b.w,
                    b.y + b.h,
                    manifest.width,
                    manifest.height
                ),
            );
        }
        if !(0.0..=1.0).contains(&det.score) {
            violation(format!("detections[{i}].score"), format!("{} outside [0, 1]", det.score));
        }
        if let Some(pose) = &det.keypoints {
            for (k, p) in pose.points.iter().enumerate() {
                if !(p.x.is_finite() && p.y.is_finite()) {
                    violation(format!("detections[{i}].keypoints[{k}]"), "non-finite coordinate".into());
                }
                if !(0.0..=1.0).contains(&p.confidence) {
                    violation(
                        format!("detections[{i}].keypoints[{k}]"),
                        format!("confidence {} outside [0, 1]", p.confidence),
                    );
                }
            }
        }
        if let Some(mask) = &det.mask_rle {
            if mask.size != [manifest.height, manifest.width] {
                violation(
                    format!("detections[{i}].mask_rle.size"),
                    format!(
                        "{:?} differs from frame [{}, {}]",
                        mask.size, manifest.height, manifest.width
                    ),
                );
            } else if let Err(e) = mask.check() {
                violation(format!("detections[{i}].mask_rle.counts"), e.to_string());
            }
        }
    }
    errs
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InterchangeError + '_ {
    move |source| InterchangeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_manifest(path: &Path) -> Result<VideoManifest, InterchangeError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: VideoManifest =
        serde_json::from_str(&text).map_err(|e| InterchangeError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    validate_manifest(&manifest)?;
    Ok(manifest)
}

/// Reads and validates a manifest and its frames file, collecting every
/// violation rather than stopping at the first one.
pub fn read_video(
    manifest_path: &Path,
    frames_path: &Path,
) -> Result<(VideoManifest, Vec<FrameRecord>), ValidationErrors> {
    let manifest = read_manifest(manifest_path).map_err(|error| {
        ValidationErrors(vec![Diagnostic {
            path: manifest_path.to_path_buf(),
            error,
        }])
    })?;
    let text = fs::read_to_string(frames_path).map_err(|e| {
        ValidationErrors(vec![Diagnostic {
            path: frames_path.to_path_buf(),
            error: io_err(frames_path)(e),
        }])
    })?;

    let mut diagnostics = Vec::new();
    let mut push = |error| {
        diagnostics.push(Diagnostic {
            path: frames_path.to_path_buf(),
            error,
        })
    };
    let mut frames: Vec<FrameRecord> = Vec::new();
    let mut last_index: Option<u64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let frame: FrameRecord = match serde_json::from_str(raw) {
            Ok(f) => f,
            Err(e) => {
                push(InterchangeError::Parse {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if frame.video_id != manifest.video_id {
            push(InterchangeError::ManifestMismatch {
                line,
                expected: manifest.video_id.clone(),
                found: frame.video_id.clone(),
            });
        }
        if let Some(prev) = last_index {
            if frame.frame_index <= prev {
                push(InterchangeError::InvariantViolation {
                    line,
                    frame_index: frame.frame_index,
                    field: "frame_index".into(),
                    detail: format!("not greater than previous index {prev}"),
                });
            }
        }
        last_index = Some(frame.frame_index);
        for e in validate_frame(&frame, &manifest, line) {
            push(e);
        }
        frames.push(frame);
    }
    if !diagnostics.is_empty() {
        return Err(ValidationErrors(diagnostics));
    }
    frames.sort_by_key(|f| f.frame_index);
    Ok((manifest, frames))
}

pub fn write_manifest(manifest: &VideoManifest, path: &Path) -> Result<(), InterchangeError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_frames(frames: &[FrameRecord], path: &Path) -> Result<(), InterchangeError> {
    let mut text = String::new();
    for f in frames {
        text.push_str(&serde_json::to_string(f).expect("frame serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_video(
    manifest: &VideoManifest,
    frames: &[FrameRecord],
    manifest_path: &Path,
    frames_path: &Path,
) -> Result<(), InterchangeError> {
    write_manifest(manifest, manifest_path)?;
    write_frames(frames, frames_path)
}
