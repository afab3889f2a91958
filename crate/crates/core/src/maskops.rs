//! Geometry over binary masks: centroids, areas, largest-mask selection,
//! union and subtraction, windows and nearest-neighbour resizing.
//!
//! Pixel centres sit at integer coordinates: pixel `(row, col)` has centre
//! `(x = col, y = row)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::{BBox, BitGrid, FrameRecord};

/// Side length of the standardized resting silhouette.
pub const STANDARD_MASK_SIZE: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("frame has no detection with a mask")]
    NoMasks,
    #[error("mask dimensions {found:?} differ from {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("no masks given")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
}

impl Centroid {
    pub fn distance(&self, other: &Centroid) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Half-open integer pixel window `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchWindow {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PatchWindow {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// Pixel window covering a real-valued box: origin floored, far edge ceiled,
    /// then clipped to the frame.
    pub fn from_bbox(b: &BBox, width: usize, height: usize) -> Self {
        Self::new(
            b.x.floor() as i64,
            b.y.floor() as i64,
            (b.x + b.w).ceil() as i64,
            (b.y + b.h).ceil() as i64,
        )
        .clip(width, height)
    }

    pub fn clip(self, width: usize, height: usize) -> Self {
        let (w, h) = (width as i64, height as i64);
        Self {
            x0: self.x0.clamp(0, w),
            y0: self.y0.clamp(0, h),
            x1: self.x1.clamp(0, w),
            y1: self.y1.clamp(0, h),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn width(&self) -> usize {
        (self.x1 - self.x0).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.y1 - self.y0).max(0) as usize
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

pub fn centroid(mask: &BitGrid) -> Result<Centroid, MaskError> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (row, col) in mask.ones() {
        sx += col as u64;
        sy += row as u64;
        n += 1;
    }
    if n == 0 {
        return Err(MaskError::EmptyMask);
    }
    Ok(Centroid {
        x: sx as f64 / n as f64,
        y: sy as f64 / n as f64,
    })
}

pub fn area(mask: &BitGrid) -> usize {
    mask.count_ones()
}

/// Index of the detection with the largest mask area; ties go to the lowest
/// index. Detections without a mask are ignored.
pub fn largest_mask(frame: &FrameRecord) -> Result<usize, MaskError> {
    let mut best: Option<(usize, u64)> = None;
    for (i, det) in frame.detections.iter().enumerate() {
        if let Some(mask) = &det.mask_rle {
            let a = mask.area();
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(MaskError::NoMasks)
}

fn check_dims(expected: (usize, usize), mask: &BitGrid) -> Result<(), MaskError> {
    if mask.dims() != expected {
        return Err(MaskError::DimensionMismatch {
            expected,
            found: mask.dims(),
        });
    }
    Ok(())
}

pub fn union_masks(masks: &[BitGrid]) -> Result<BitGrid, MaskError> {
    let first = masks.first().ok_or(MaskError::EmptyInput)?;
    let mut out = first.clone();
    for m in &masks[1..] {
        check_dims(first.dims(), m)?;
        for (row, col) in m.ones() {
            out.set(row, col, true);
        }
    }
    Ok(out)
}

pub fn intersect_masks(a: &BitGrid, b: &BitGrid) -> Result<BitGrid, MaskError> {
    check_dims(a.dims(), b)?;
    Ok(BitGrid::from_fn(a.height(), a.width(), |r, c| a.get(r, c) && b.get(r, c)))
}

/// Window-sized keep-mask: set where the window pixel is outside every mask.
/// Masks are frame-sized; window pixels beyond a mask's extent count as
/// uncovered by it.
pub fn patch_minus_masks(window: &PatchWindow, masks: &[BitGrid]) -> BitGrid {
    BitGrid::from_fn(window.height(), window.width(), |r, c| {
        let (y, x) = (window.y0 + r as i64, window.x0 + c as i64);
        !masks.iter().any(|m| {
            y >= 0 && x >= 0 && (y as usize) < m.height() && (x as usize) < m.width() && m.get(y as usize, x as usize)
        })
    })
}

/// Copies the part of `mask` inside `window` (clipped to the mask).
pub fn crop(mask: &BitGrid, window: &PatchWindow) -> BitGrid {
    let w = window.clip(mask.width(), mask.height());
    BitGrid::from_fn(w.height(), w.width(), |r, c| {
        mask.get(w.y0 as usize + r, w.x0 as usize + c)
    })
}

#[inline]
fn nearest_source(i: usize, src: usize, out: usize) -> usize {
    // floor((i + 0.5) * src / out) in exact integer arithmetic
    ((2 * i + 1) * src) / (2 * out)
}

/// Nearest-neighbour resize sampling at pixel centres.
pub fn resize_nearest(mask: &BitGrid, out_h: usize, out_w: usize) -> BitGrid {
    assert!(out_h >= 1 && out_w >= 1, "output dimensions must be positive");
    let (src_h, src_w) = mask.dims();
    if src_h == 0 || src_w == 0 {
        return BitGrid::new(out_h, out_w);
    }
    let cols: Vec<usize> = (0..out_w).map(|j| nearest_source(j, src_w, out_w)).collect();
    BitGrid::from_fn(out_h, out_w, |i, j| {
        mask.get(nearest_source(i, src_h, out_h), cols[j])
    })
}
