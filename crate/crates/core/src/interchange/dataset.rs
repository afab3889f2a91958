use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{read_video, write_video, Diagnostic, FrameRecord, InterchangeError, ValidationErrors, VideoManifest};
use crate::imagery::{ImageryIndex, IMAGERY_INDEX_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.jsonl";

/// A validated video loaded from a directory holding `manifest.json`,
/// `frames.jsonl` and optionally `imagery/index.json`.
#[derive(Debug, Clone)]
pub struct VideoDir {
    pub dir: PathBuf,
    pub manifest: VideoManifest,
    pub frames: Vec<FrameRecord>,
    pub imagery: Option<ImageryIndex>,
}

impl VideoDir {
    pub fn video_id(&self) -> &str {
        &self.manifest.video_id
    }
}

pub fn load_video_dir(dir: &Path) -> Result<VideoDir, ValidationErrors> {
    let (manifest, frames) = read_video(&dir.join(MANIFEST_FILE), &dir.join(FRAMES_FILE))?;
    let index_path = dir.join("imagery").join(IMAGERY_INDEX_FILE);
    let imagery = if index_path.exists() {
        Some(ImageryIndex::read(&index_path).map_err(|error| {
            ValidationErrors(vec![Diagnostic {
                path: index_path.clone(),
                error,
            }])
        })?)
    } else {
        None
    };
    Ok(VideoDir {
        dir: dir.to_path_buf(),
        manifest,
        frames,
        imagery,
    })
}

/// Finds every video directory below `roots`, validates all of them and
/// returns them ordered by `video_id`.
pub fn discover_videos<P: AsRef<Path>>(roots: &[P]) -> Result<Vec<VideoDir>, ValidationErrors> {
    let mut dirs = Vec::new();
    let mut diagnostics = Vec::new();
    for root in roots {
        let root = root.as_ref();
        if !root.exists() {
            diagnostics.push(Diagnostic {
                path: root.to_path_buf(),
                error: InterchangeError::Io {
                    path: root.to_path_buf(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
                },
            });
            continue;
        }
        for entry in WalkDir::new(root).sort_by_file_name() {
            match entry {
                Ok(e) if e.file_type().is_file() && e.file_name() == MANIFEST_FILE => {
                    dirs.push(e.path().parent().unwrap_or(root).to_path_buf());
                }
                Ok(_) => {}
                Err(e) => diagnostics.push(Diagnostic {
                    path: e.path().unwrap_or(root).to_path_buf(),
                    error: InterchangeError::Io {
                        path: root.to_path_buf(),
                        source: e.into(),
                    },
                }),
            }
        }
    }

    let mut by_id: BTreeMap<String, VideoDir> = BTreeMap::new();
    for dir in dirs {
        match load_video_dir(&dir) {
            Ok(v) => {
                if let Some(prev) = by_id.get(v.video_id()) {
                    diagnostics.push(Diagnostic {
                        path: dir.join(MANIFEST_FILE),
                        error: InterchangeError::InvalidManifest {
                            field: "video_id".into(),
                            detail: format!("{:?} already loaded from {}", v.video_id(), prev.dir.display()),
                        },
                    });
                } else {
                    by_id.insert(v.video_id().to_string(), v);
                }
            }
            Err(ValidationErrors(mut d)) => diagnostics.append(&mut d),
        }
    }
    if !diagnostics.is_empty() {
        return Err(ValidationErrors(diagnostics));
    }
    Ok(by_id.into_values().collect())
}

pub fn write_video_dir(
    dir: &Path,
    manifest: &VideoManifest,
    frames: &[FrameRecord],
) -> Result<(), InterchangeError> {
    fs::create_dir_all(dir).map_err(|source| InterchangeError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_video(manifest, frames, &dir.join(MANIFEST_FILE), &dir.join(FRAMES_FILE))
}
