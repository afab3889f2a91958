//! File format through which perception outputs enter the engine.
//!
//! A video is a JSON manifest plus a JSON-lines frames file. Each frame line
//! carries the detections kept for one downsampled frame: a bounding box, an
//! optional 17-point pose and an optional row-major RLE mask.

mod dataset;
mod grid;
mod types;

use std::path::PathBuf;

use thiserror::Error;

pub use dataset::{discover_videos, load_video_dir, write_video_dir, VideoDir, FRAMES_FILE, MANIFEST_FILE};
pub use grid::{decode_rle, encode_rle, BitGrid, RleMask};
pub use types::{
    read_video, validate_frame, validate_manifest, write_frames, write_manifest, write_video, Activity,
    BBox, Detection, FrameRecord, Keypoint, PoseSet, Social, VideoManifest, View, NUM_KEYPOINTS,
};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("RLE run sum {sum} does not match mask cell count {expected}")]
    RleSumMismatch { sum: u64, expected: u64 },
    #[error("RLE run of {count} exceeds the {remaining} remaining cells")]
    RleOverflow { count: u64, remaining: u64 },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: frame {frame_index}: InvariantViolation on `{field}`: {detail}")]
    InvariantViolation {
        line: usize,
        frame_index: u64,
        field: String,
        detail: String,
    },
    #[error("line {line}: ManifestMismatch: video_id {found:?} differs from manifest {expected:?}")]
    ManifestMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("invalid manifest field `{field}`: {detail}")]
    InvalidManifest { field: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl InterchangeError {
    /// Line number within the offending file, when the error is tied to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Parse { line, .. }
            | Self::InvariantViolation { line, .. }
            | Self::ManifestMismatch { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// One validation failure located in a file.
#[derive(Debug)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub error: InterchangeError,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.error.line() {
            Some(line) => {
                // the error message already carries "line N: "; lead with file:line
                let msg = self.error.to_string();
                let msg = msg.split_once(": ").map(|(_, rest)| rest).unwrap_or(&msg);
                write!(f, "{}:{}: {}", self.path.display(), line, msg)
            }
            None => write!(f, "{}: {}", self.path.display(), self.error),
        }
    }
}

/// Every problem found while reading a video.
#[derive(Debug, Error)]
#[error("{} validation error(s), first: {}", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
pub struct ValidationErrors(pub Vec<Diagnostic>);
