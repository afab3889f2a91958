//! Seeded generators for interchange datasets with exact ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagery::{ImageryIndex, RgbImage, IMAGERY_INDEX_FILE};
use crate::interchange::{
    encode_rle, write_video_dir, Activity, BBox, BitGrid, Detection, FrameRecord, InterchangeError, Keypoint,
    PoseSet, Social, VideoManifest, View, NUM_KEYPOINTS,
};
use crate::maskops::{resize_nearest, STANDARD_MASK_SIZE};

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("object leaves the frame at kept frame {frame}: bbox ({x:.2}, {y:.2}, {w:.2}, {h:.2})")]
    OutOfFrame { frame: u64, x: f64, y: f64, w: f64, h: f64 },
    #[error("invalid synth parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidParameter(msg.into())
}

/// One generated video, optionally with per-frame imagery.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub manifest: VideoManifest,
    pub frames: Vec<FrameRecord>,
    pub images: Vec<(u64, RgbImage)>,
}

/// Writes `<root>/<video_id>/` with manifest, frames and, when present,
/// `imagery/index.json` plus one PPM per frame.
pub fn write_synth_video(root: &Path, video: &SynthVideo) -> Result<PathBuf, SynthError> {
    let dir = root.join(&video.manifest.video_id);
    write_video_dir(&dir, &video.manifest, &video.frames)?;
    if !video.images.is_empty() {
        let img_dir = dir.join("imagery");
        fs::create_dir_all(&img_dir).map_err(io_err(&img_dir))?;
        let mut index = ImageryIndex {
            base_dir: img_dir.clone(),
            entries: Default::default(),
        };
        for (frame_index, img) in &video.images {
            let name = format!("frame_{frame_index:06}.ppm");
            let path = img_dir.join(&name);
            img.write(&path).map_err(|e| invalid(e.to_string()))?;
            index.entries.insert(*frame_index, name);
        }
        index.write(&img_dir.join(IMAGERY_INDEX_FILE))?;
    }
    Ok(dir)
}

pub fn write_truth<T: Serialize>(root: &Path, truth: &T) -> Result<PathBuf, SynthError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let path = root.join(TRUTH_FILE);
    let mut text = serde_json::to_string_pretty(truth).expect("truth serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Pixel `(row, col)` is set when its centre `(col, row)` lies inside the
/// axis-aligned ellipse.
pub fn rasterize_ellipse(height: usize, width: usize, cx: f64, cy: f64, rx: f64, ry: f64) -> BitGrid {
    BitGrid::from_fn(height, width, |r, c| {
        let dx = (c as f64 - cx) / rx;
        let dy = (r as f64 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    })
}

fn rect_mask(height: usize, width: usize, x: usize, y: usize, w: usize, h: usize) -> BitGrid {
    BitGrid::from_fn(height, width, |r, c| r >= y && r < y + h && c >= x && c < x + w)
}

fn manifest(id: &str, activity: Activity, view: Option<View>, social: Option<Social>, w: u32, h: u32) -> VideoManifest {
    VideoManifest {
        video_id: id.to_string(),
        fps: 30.0,
        activity,
        view,
        social,
        frame_stride: 10,
        width: w,
        height: h,
    }
}

// ---------------------------------------------------------------- motion

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frame_stride: u32,
    pub n_frames: usize,
    /// Centre at kept frame 0.
    pub start: (f64, f64),
    /// Displacement per kept frame at depth scale 1.
    pub velocity: (f64, f64),
    pub radii: (f64, f64),
    /// `(first kept frame, scale)` steps; scale 1 before the first entry.
    pub depth_schedule: Vec<(u64, f64)>,
}

impl Default for MotionSpec {
    fn default() -> Self {
        Self {
            video_id: "motion".into(),
            width: 640,
            height: 480,
            fps: 30.0,
            frame_stride: 10,
            n_frames: 40,
            start: (60.0, 60.0),
            velocity: (3.0, 4.0),
            radii: (20.0, 12.0),
            depth_schedule: Vec::new(),
        }
    }
}

impl MotionSpec {
    pub fn scale_at(&self, frame: u64) -> f64 {
        self.depth_schedule
            .iter()
            .filter(|(from, _)| *from <= frame)
            .last()
            .map_or(1.0, |&(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionTruth {
    pub video_id: String,
    /// `‖v‖ · fps / frame_stride` at depth scale 1.
    pub base_speed_px_per_s: f64,
    /// Per step: depth scale in effect at the step start.
    pub step_scales: Vec<f64>,
    /// Per step: `scale · base_speed`.
    pub raw_speed_px_per_s: Vec<f64>,
    pub centers: Vec<(f64, f64)>,
}

/// Ellipse translating at constant velocity. Depth scales radii and the
/// per-frame displacement together.
pub fn gen_motion(spec: &MotionSpec) -> Result<(SynthVideo, MotionTruth), SynthError> {
    if spec.n_frames < 2 {
        return Err(invalid("motion needs at least 2 frames"));
    }
    if !(spec.fps > 0.0) || spec.frame_stride == 0 || spec.width == 0 || spec.height == 0 {
        return Err(invalid("fps, frame_stride and frame size must be positive"));
    }
    if !(spec.radii.0 > 0.0 && spec.radii.1 > 0.0) || spec.depth_schedule.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(invalid("radii and depth scales must be positive"));
    }
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut m = manifest(&spec.video_id, Activity::Running, None, Some(Social::Single), spec.width, spec.height);
    m.fps = spec.fps;
    m.frame_stride = spec.frame_stride;

    let base = spec.velocity.0.hypot(spec.velocity.1) * spec.fps / spec.frame_stride as f64;
    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut centers = Vec::with_capacity(spec.n_frames);
    let mut scales = Vec::new();
    let (mut cx, mut cy) = spec.start;
    for t in 0..spec.n_frames as u64 {
        let s = spec.scale_at(t);
        let (rx, ry) = (spec.radii.0 * s, spec.radii.1 * s);
        let (bx, by, bw, bh) = (cx - rx, cy - ry, 2.0 * rx, 2.0 * ry);
        if bx < 0.0 || by < 0.0 || bx + bw > spec.width as f64 || by + bh > spec.height as f64 {
            return Err(SynthError::OutOfFrame {
                frame: t,
                x: bx,
                y: by,
                w: bw,
                h: bh,
            });
        }
        let mask = rasterize_ellipse(h, w, cx, cy, rx, ry);
        frames.push(FrameRecord {
            video_id: spec.video_id.clone(),
            frame_index: t,
            detections: vec![Detection {
                track_id: None,
                bbox: BBox::new(bx, by, bw, bh),
                score: 0.99,
                keypoints: None,
                mask_rle: Some(encode_rle(&mask)),
            }],
        });
        centers.push((cx, cy));
        if (t as usize) + 1 < spec.n_frames {
            scales.push(s);
        }
        cx += spec.velocity.0 * s;
        cy += spec.velocity.1 * s;
    }
    let truth = MotionTruth {
        video_id: spec.video_id.clone(),
        base_speed_px_per_s: base,
        raw_speed_px_per_s: scales.iter().map(|s| s * base).collect(),
        step_scales: scales,
        centers,
    };
    Ok((
        SynthVideo {
            manifest: m,
            frames,
            images: Vec::new(),
        },
        truth,
    ))
}

// ---------------------------------------------------------------- blobs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub k: usize,
    pub per_blob: usize,
    pub dim: usize,
    pub sigma: f64,
    /// Minimum distance between blob centres.
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            k: 10,
            per_blob: 50,
            dim: 2,
            sigma: 0.1,
            separation: 5.0,
            seed: 42,
        }
    }
}

/// Blob centres on a square lattice over the first two axes with spacing
/// `separation`; remaining axes are centred at 0.
pub fn blob_centers(k: usize, dim: usize, separation: f64) -> Array2<f64> {
    let side = (k as f64).sqrt().ceil().max(1.0) as usize;
    Array2::from_shape_fn((k, dim), |(b, j)| match (j, dim) {
        (0, 1) => b as f64 * separation,
        (0, _) => (b % side) as f64 * separation,
        (1, _) => (b / side) as f64 * separation,
        _ => 0.0,
    })
}

/// Isotropic Gaussian blobs; rows are ordered blob by blob.
pub fn gen_blobs(spec: &BlobSpec) -> (Array2<f64>, Vec<usize>) {
    assert!(spec.k >= 1 && spec.dim >= 1, "k and dim must be positive");
    let centers = blob_centers(spec.k, spec.dim, spec.separation);
    let noise = Normal::new(0.0, spec.sigma).expect("sigma must be finite and non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.k * spec.per_blob;
    let mut data = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let b = i / spec.per_blob;
        for j in 0..spec.dim {
            data[[i, j]] = centers[[b, j]] + noise.sample(&mut rng);
        }
        labels.push(b);
    }
    (data, labels)
}

// ---------------------------------------------------------------- grazing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingSpec {
    pub n_single: usize,
    pub n_herd: usize,
    pub n_frames: usize,
    /// Fraction of patch columns painted pure green.
    pub single_green_fraction: f64,
    pub herd_green_fraction: f64,
    /// Per-frame uniform perturbation of the fraction, in columns.
    pub column_jitter: usize,
    pub seed: u64,
}

impl Default for GrazingSpec {
    fn default() -> Self {
        Self {
            n_single: 3,
            n_herd: 3,
            n_frames: 12,
            single_green_fraction: 0.8,
            herd_green_fraction: 0.4,
            column_jitter: 2,
            seed: 42,
        }
    }
}

const GRAZE_W: usize = 160;
const GRAZE_H: usize = 120;
const BODY_W: usize = 40;
const BODY_H: usize = 28;
const GRAY: [u8; 3] = [128, 128, 128];
const GREEN: [u8; 3] = [0, 255, 0];
const BODY: [u8; 3] = [120, 80, 40];

/// Patch side for the generator's body box with a 0.4 side factor.
fn graze_patch_side() -> usize {
    (0.4 * ((BODY_W * BODY_W + BODY_H * BODY_H) as f64).sqrt()).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingVideoTruth {
    pub video_id: String,
    pub social: Social,
    /// Expected excess-green frame score per kept frame.
    pub frame_scores: Vec<f64>,
    pub activity_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingTruth {
    pub patch_side: usize,
    pub videos: Vec<GrazingVideoTruth>,
}

/// Sheep are brown rectangles with the nose keypoint on the bottom edge. The
/// patch below each nose has its leftmost `g` columns pure green and the rest
/// gray; the body covers the patch rows above the nose. The kept part of the
/// patch therefore scores `2 g / side` in closed form.
pub fn gen_grazing(spec: &GrazingSpec) -> Result<(Vec<SynthVideo>, GrazingTruth), SynthError> {
    if spec.n_frames == 0 {
        return Err(invalid("grazing needs at least one frame"));
    }
    for f in [spec.single_green_fraction, spec.herd_green_fraction] {
        if !(0.0..=1.0).contains(&f) {
            return Err(invalid("green fractions must lie in [0, 1]"));
        }
    }
    let side = graze_patch_side();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut videos = Vec::new();
    let mut truths = Vec::new();
    let groups = [(Social::Single, spec.n_single, spec.single_green_fraction, 1usize), (Social::Herd, spec.n_herd, spec.herd_green_fraction, 3)];
    for (social, count, fraction, sheep) in groups {
        for v in 0..count {
            let id = format!("graze_{social}_{v:02}");
            let m = manifest(&id, Activity::Grazing, Some(View::Side), Some(social), GRAZE_W as u32, GRAZE_H as u32);
            let mut frames = Vec::new();
            let mut images = Vec::new();
            let mut scores = Vec::new();
            for t in 0..spec.n_frames as u64 {
                let mut img = RgbImage::new(GRAZE_W, GRAZE_H, GRAY);
                let mut detections = Vec::new();
                let mut frame_sum = 0.0;
                for s in 0..sheep {
                    let bx = 8 + s * 52;
                    let by = 30 + rng.random_range(0..8usize);
                    let (nx, ny) = (bx + BODY_W / 2, by + BODY_H - 1);
                    let x0 = (nx as f64 - side as f64 / 2.0).round() as usize;
                    let y0 = (ny as f64 - side as f64 / 2.0).round() as usize;
                    let base_cols = (fraction * side as f64).round() as i64;
                    let j = spec.column_jitter as i64;
                    let g = (base_cols + if j > 0 { rng.random_range(-j..=j) } else { 0 }).clamp(0, side as i64) as usize;
                    for r in y0..y0 + side {
                        for c in x0..x0 + g {
                            img.put_pixel(r, c, GREEN);
                        }
                    }
                    for r in by..by + BODY_H {
                        for c in bx..bx + BODY_W {
                            img.put_pixel(r, c, BODY);
                        }
                    }
                    let mask = rect_mask(GRAZE_H, GRAZE_W, bx, by, BODY_W, BODY_H);
                    let mut pts = [Keypoint {
                        x: nx as f64,
                        y: (by + BODY_H / 2) as f64,
                        confidence: 0.9,
                    }; NUM_KEYPOINTS];
                    for (k, p) in pts.iter_mut().enumerate() {
                        p.x = (bx + 2 + (k * 37) % (BODY_W - 4)) as f64;
                    }
                    pts[2] = Keypoint {
                        x: nx as f64,
                        y: ny as f64,
                        confidence: 0.95,
                    };
                    detections.push(Detection {
                        track_id: Some(s as u64),
                        bbox: BBox::new(bx as f64, by as f64, BODY_W as f64, BODY_H as f64),
                        score: 0.9,
                        keypoints: Some(PoseSet::new(pts)),
                        mask_rle: Some(encode_rle(&mask)),
                    });
                    frame_sum += 2.0 * g as f64 / side as f64;
                }
                scores.push(frame_sum / sheep as f64);
                frames.push(FrameRecord {
                    video_id: id.clone(),
                    frame_index: t,
                    detections,
                });
                images.push((t, img));
            }
            truths.push(GrazingVideoTruth {
                video_id: id.clone(),
                social,
                activity_index: scores.iter().sum::<f64>() / scores.len() as f64,
                frame_scores: scores,
            });
            videos.push(SynthVideo {
                manifest: m,
                frames,
                images,
            });
        }
    }
    Ok((
        videos,
        GrazingTruth {
            patch_side: side,
            videos: truths,
        },
    ))
}

// ---------------------------------------------------------------- gait

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitAnimalSpec {
    /// `(template id, weight)`; weights are normalized.
    pub templates: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSpec {
    pub animals: Vec<GaitAnimalSpec>,
    pub n_templates: usize,
    pub frames_per_animal: usize,
    /// Keypoint jitter as a fraction of the bbox diagonal.
    pub sigma: f64,
    pub seed: u64,
}

impl GaitSpec {
    /// `n` animals, animal `i` always in template `i`.
    pub fn one_template_each(n: usize, frames_per_animal: usize, sigma: f64, seed: u64) -> Self {
        Self {
            animals: (0..n).map(|i| GaitAnimalSpec { templates: vec![(i, 1.0)] }).collect(),
            n_templates: n,
            frames_per_animal,
            sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitTruth {
    /// Per video, the template id of every kept frame.
    pub assignments: Vec<(String, Vec<usize>)>,
}

const GAIT_W: u32 = 640;
const GAIT_H: u32 = 480;
const GAIT_BOX: (f64, f64) = (200.0, 150.0);

/// Template keypoints in bbox-relative units, within `[-0.45, 0.45]`.
pub fn pose_templates(n: usize, seed: u64) -> Vec<[(f64, f64); NUM_KEYPOINTS]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e3a_11c5);
    (0..n)
        .map(|_| std::array::from_fn(|_| (rng.random_range(-0.45..0.45), rng.random_range(-0.45..0.45))))
        .collect()
}

/// One running video per animal. The bbox drifts across the frame; keypoints
/// are template positions, snapped to whole pixels, plus Gaussian jitter
/// scaled by the bbox diagonal.
pub fn gen_gait(spec: &GaitSpec) -> Result<(Vec<SynthVideo>, GaitTruth), SynthError> {
    if spec.n_templates == 0 || spec.frames_per_animal == 0 {
        return Err(invalid("gait needs templates and frames"));
    }
    let templates = pose_templates(spec.n_templates, spec.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let diag = GAIT_BOX.0.hypot(GAIT_BOX.1);
    let jitter = Normal::new(0.0, spec.sigma * diag).map_err(|e| invalid(e.to_string()))?;
    let mut videos = Vec::new();
    let mut truth = Vec::new();
    for (a, animal) in spec.animals.iter().enumerate() {
        let total: f64 = animal.templates.iter().map(|t| t.1).sum();
        if animal.templates.is_empty() || !(total > 0.0) || animal.templates.iter().any(|t| t.0 >= spec.n_templates || t.1 < 0.0) {
            return Err(invalid(format!("animal {a} has an invalid template mixture")));
        }
        let id = format!("gait_{a:02}");
        let m = manifest(&id, Activity::Running, Some(View::Side), Some(Social::Single), GAIT_W, GAIT_H);
        let mut frames = Vec::new();
        let mut ids = Vec::new();
        for t in 0..spec.frames_per_animal as u64 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut tid = animal.templates.last().expect("non-empty").0;
            for &(id, w) in &animal.templates {
                acc += w;
                if u < acc {
                    tid = id;
                    break;
                }
            }
            let bx = 20.0 + (t as f64 * 4.0) % 400.0;
            let by = 150.0 + rng.random_range(-20..20) as f64;
            let (cx, cy) = (bx + GAIT_BOX.0 / 2.0, by + GAIT_BOX.1 / 2.0);
            let pts = std::array::from_fn(|k| {
                let (tx, ty) = templates[tid][k];
                Keypoint {
                    x: (cx + (tx * GAIT_BOX.0).round() + jitter.sample(&mut rng)).clamp(0.0, GAIT_W as f64),
                    y: (cy + (ty * GAIT_BOX.1).round() + jitter.sample(&mut rng)).clamp(0.0, GAIT_H as f64),
                    confidence: 0.9,
                }
            });
            frames.push(FrameRecord {
                video_id: id.clone(),
                frame_index: t,
                detections: vec![Detection {
                    track_id: None,
                    bbox: BBox::new(bx, by, GAIT_BOX.0, GAIT_BOX.1),
                    score: 0.95,
                    keypoints: Some(PoseSet::new(pts)),
                    mask_rle: None,
                }],
            });
            ids.push(tid);
        }
        truth.push((id, ids));
        videos.push(SynthVideo {
            manifest: m,
            frames,
            images: Vec::new(),
        });
    }
    Ok((videos, GaitTruth { assignments: truth }))
}

// ---------------------------------------------------------------- resting

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestingSpec {
    /// Kept frames of each single-animal video (one sheep per frame).
    pub single_frames: usize,
    /// Kept frames of each herd video (`herd_size` sheep per frame).
    pub herd_frames: usize,
    pub herd_size: usize,
    /// Per-pixel flip probability applied at 64×64 resolution.
    pub flip_noise: f64,
    pub seed: u64,
}

impl Default for RestingSpec {
    fn default() -> Self {
        Self {
            single_frames: 60,
            herd_frames: 12,
            herd_size: 5,
            flip_noise: 0.01,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestingTruth {
    /// Per video, per frame, per detection: silhouette template id.
    pub assignments: Vec<(String, Vec<Vec<usize>>)>,
}

/// Blobby silhouettes: each template is the union of four seeded ellipses on
/// the standard grid.
pub fn silhouette_templates(n: usize, seed: u64) -> Vec<BitGrid> {
    let s = STANDARD_MASK_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51a4_0e77);
    (0..n)
        .map(|_| {
            let parts: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.random_range(16.0..48.0),
                        rng.random_range(16.0..48.0),
                        rng.random_range(6.0..20.0),
                        rng.random_range(6.0..20.0),
                    )
                })
                .collect();
            BitGrid::from_fn(s, s, |r, c| {
                parts.iter().any(|&(cx, cy, rx, ry)| {
                    let dx = (c as f64 - cx) / rx;
                    let dy = (r as f64 - cy) / ry;
                    dx * dx + dy * dy <= 1.0
                })
            })
        })
        .collect()
}

fn flip_noise(template: &BitGrid, p: f64, rng: &mut ChaCha8Rng) -> BitGrid {
    BitGrid::from_fn(template.height(), template.width(), |r, c| {
        template.get(r, c) ^ (rng.random::<f64>() < p)
    })
}

/// Places `shape` scaled to `size × size` at `(x, y)` in a frame-sized grid.
fn place(frame_h: usize, frame_w: usize, shape: &BitGrid, x: usize, y: usize, size: usize) -> BitGrid {
    let scaled = resize_nearest(shape, size, size);
    BitGrid::from_fn(frame_h, frame_w, |r, c| {
        r >= y && r < y + size && c >= x && c < x + size && scaled.get(r - y, c - x)
    })
}

/// Per view: one single-animal video drawing every silhouette from template 0
/// (alternating 64 and 128 px boxes), and one herd video whose sheep use
/// templates 1..=herd_size. Templates differ between views.
pub fn gen_resting(spec: &RestingSpec) -> Result<(Vec<SynthVideo>, RestingTruth), SynthError> {
    if spec.herd_size == 0 || spec.herd_size > 5 || !(0.0..=0.5).contains(&spec.flip_noise) {
        return Err(invalid("herd_size must be 1..=5 and flip_noise within [0, 0.5]"));
    }
    let (fw, fh) = (400usize, 160usize);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut videos = Vec::new();
    let mut truth = Vec::new();
    for (vi, view) in [View::Front, View::Side].into_iter().enumerate() {
        let templates = silhouette_templates(spec.herd_size + 1, spec.seed.wrapping_add(vi as u64 * 1000));
        for social in [Social::Single, Social::Herd] {
            let id = format!("rest_{view}_{social}");
            let m = manifest(&id, Activity::Sitting, Some(view), Some(social), fw as u32, fh as u32);
            let n_frames = if social == Social::Single { spec.single_frames } else { spec.herd_frames };
            let mut frames = Vec::new();
            let mut ids = Vec::new();
            for t in 0..n_frames as u64 {
                let slots: Vec<(usize, usize, usize, usize)> = match social {
                    // (template, x, y, size)
                    Social::Single => {
                        let size = if t % 2 == 0 { 64 } else { 128 };
                        vec![(0, 100 + rng.random_range(0..100), rng.random_range(0..fh - size + 1), size)]
                    }
                    Social::Herd => (0..spec.herd_size)
                        .map(|s| (s + 1, 8 + s * 78, rng.random_range(0..fh - 64 + 1), 64))
                        .collect(),
                };
                let mut detections = Vec::new();
                let mut frame_ids = Vec::new();
                for (tid, x, y, size) in slots {
                    let noisy = flip_noise(&templates[tid], spec.flip_noise, &mut rng);
                    let mask = place(fh, fw, &noisy, x, y, size);
                    detections.push(Detection {
                        track_id: None,
                        bbox: BBox::new(x as f64, y as f64, size as f64, size as f64),
                        score: 0.9,
                        keypoints: None,
                        mask_rle: Some(encode_rle(&mask)),
                    });
                    frame_ids.push(tid);
                }
                frames.push(FrameRecord {
                    video_id: id.clone(),
                    frame_index: t,
                    detections,
                });
                ids.push(frame_ids);
            }
            truth.push((id, ids));
            videos.push(SynthVideo {
                manifest: m,
                frames,
                images: Vec::new(),
            });
        }
    }
    Ok((videos, RestingTruth { assignments: truth }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::{decode_rle, discover_videos, validate_frame};
    use crate::maskops::{centroid, crop, PatchWindow};

    #[test]
    fn stationary_motion_has_zero_truth() {
        let spec = MotionSpec {
            velocity: (0.0, 0.0),
            ..Default::default()
        };
        let (v, truth) = gen_motion(&spec).unwrap();
        assert_eq!(truth.base_speed_px_per_s, 0.0);
        assert!(v.frames.windows(2).all(|w| w[0].detections[0].mask_rle == w[1].detections[0].mask_rle));
    }

    #[test]
    fn motion_truth_and_depth() {
        let spec = MotionSpec {
            depth_schedule: vec![(20, 0.5)],
            ..Default::default()
        };
        let (v, truth) = gen_motion(&spec).unwrap();
        assert_eq!(truth.base_speed_px_per_s, 15.0);
        assert_eq!(truth.raw_speed_px_per_s[19], 15.0);
        assert_eq!(truth.raw_speed_px_per_s[20], 7.5);
        // rasterized centroid within a fraction of a pixel of the true centre
        for (f, &(cx, cy)) in v.frames.iter().zip(&truth.centers) {
            let c = centroid(&decode_rle(f.detections[0].mask_rle.as_ref().unwrap()).unwrap()).unwrap();
            assert!((c.x - cx).abs() < 0.5 && (c.y - cy).abs() < 0.5);
        }
    }

    #[test]
    fn motion_out_of_frame() {
        let spec = MotionSpec {
            velocity: (50.0, 0.0),
            ..Default::default()
        };
        assert!(matches!(gen_motion(&spec), Err(SynthError::OutOfFrame { .. })));
    }

    #[test]
    fn blobs_are_deterministic_and_labelled() {
        let spec = BlobSpec { k: 1, ..Default::default() };
        assert!(gen_blobs(&spec).1.iter().all(|&l| l == 0));
        let spec = BlobSpec::default();
        assert_eq!(gen_blobs(&spec), gen_blobs(&spec));
        let c = blob_centers(10, 3, 5.0);
        for i in 0..10 {
            for j in i + 1..10 {
                let d: f64 = (0..3).map(|a| (c[[i, a]] - c[[j, a]]).powi(2)).sum::<f64>().sqrt();
                assert!(d >= 5.0 - 1e-12);
            }
        }
    }

    #[test]
    fn every_generator_emits_valid_interchange() {
        let mut all = Vec::new();
        all.push(gen_motion(&MotionSpec::default()).unwrap().0);
        all.extend(gen_grazing(&GrazingSpec::default()).unwrap().0);
        all.extend(gen_gait(&GaitSpec::one_template_each(3, 10, 0.02, 1)).unwrap().0);
        all.extend(gen_resting(&RestingSpec { single_frames: 4, herd_frames: 2, ..Default::default() }).unwrap().0);
        for v in &all {
            for (i, f) in v.frames.iter().enumerate() {
                assert!(validate_frame(f, &v.manifest, i + 1).is_empty(), "{}", v.manifest.video_id);
            }
        }
    }

    #[test]
    fn written_trees_are_byte_identical_and_readable() {
        let gen = || gen_grazing(&GrazingSpec { n_frames: 2, ..Default::default() }).unwrap().0;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for v in gen() {
            write_synth_video(a.path(), &v).unwrap();
        }
        for v in gen() {
            write_synth_video(b.path(), &v).unwrap();
        }
        let files = |root: &Path| {
            let mut out: Vec<(PathBuf, Vec<u8>)> = walkdir::WalkDir::new(root)
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_file())
                .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), fs::read(e.path()).unwrap()))
                .collect();
            out.sort();
            out
        };
        assert_eq!(files(a.path()), files(b.path()));
        let videos = discover_videos(&[a.path()]).unwrap();
        assert_eq!(videos.len(), 6);
        assert!(videos.iter().all(|v| v.imagery.as_ref().unwrap().entries.len() == 2));
    }

    #[test]
    fn grazing_truth_matches_painted_pixels() {
        let (videos, truth) = gen_grazing(&GrazingSpec { n_frames: 3, ..Default::default() }).unwrap();
        let side = truth.patch_side;
        for (v, t) in videos.iter().zip(&truth.videos) {
            for (k, f) in v.frames.iter().enumerate() {
                let img = &v.images[k].1;
                let mut sum = 0.0;
                for d in &f.detections {
                    let nose = d.keypoints.as_ref().unwrap().points[2];
                    let x0 = (nose.x - side as f64 / 2.0).round() as usize;
                    let green = (x0..x0 + side).filter(|&c| img.pixel((nose.y + 2.0) as usize, c) == GREEN).count();
                    sum += 2.0 * green as f64 / side as f64;
                }
                assert!((sum / f.detections.len() as f64 - t.frame_scores[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gait_single_template_without_noise_repeats_relative_pose() {
        let (videos, truth) = gen_gait(&GaitSpec::one_template_each(1, 5, 0.0, 3)).unwrap();
        assert!(truth.assignments[0].1.iter().all(|&t| t == 0));
        let rel = |f: &FrameRecord| {
            let d = &f.detections[0];
            let p = &d.keypoints.as_ref().unwrap().points;
            p.iter().map(|k| (k.x - d.bbox.x, k.y - d.bbox.y)).collect::<Vec<_>>()
        };
        let first = rel(&videos[0].frames[0]);
        for f in &videos[0].frames {
            for (a, b) in rel(f).iter().zip(&first) {
                assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gait_mixture_proportions() {
        let spec = GaitSpec {
            animals: vec![GaitAnimalSpec {
                templates: vec![(0, 0.7), (1, 0.2), (2, 0.1)],
            }],
            n_templates: 3,
            frames_per_animal: 3000,
            sigma: 0.02,
            seed: 5,
        };
        let (_, truth) = gen_gait(&spec).unwrap();
        let ids = &truth.assignments[0].1;
        for (t, p) in [(0, 0.7), (1, 0.2), (2, 0.1)] {
            let got = ids.iter().filter(|&&x| x == t).count() as f64 / ids.len() as f64;
            let se = (p * (1.0 - p) / ids.len() as f64).sqrt();
            assert!((got - p).abs() < 4.0 * se, "template {t}: {got}");
        }
    }

    #[test]
    fn resting_silhouettes_recover_templates_after_crop() {
        let spec = RestingSpec {
            single_frames: 4,
            herd_frames: 1,
            flip_noise: 0.0,
            ..Default::default()
        };
        let (videos, _) = gen_resting(&spec).unwrap();
        let templates = silhouette_templates(spec.herd_size + 1, spec.seed);
        let single = &videos[0];
        for f in &single.frames {
            let d = &f.detections[0];
            let grid = decode_rle(d.mask_rle.as_ref().unwrap()).unwrap();
            let win = PatchWindow::from_bbox(&d.bbox, grid.width(), grid.height());
            let back = resize_nearest(&crop(&grid, &win), 64, 64);
            assert_eq!(back, templates[0]);
        }
        assert_eq!(videos[1].frames[0].detections.len(), 5);
    }
}
