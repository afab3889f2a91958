//! Per-frame RGB imagery: binary PPM (P6, 8-bit) files plus a JSON index
//! mapping kept frame indices to file paths relative to the index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::interchange::InterchangeError;

pub const IMAGERY_INDEX_FILE: &str = "index.json";

#[derive(Debug, Error)]
pub enum ImageryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed PPM: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("no imagery for frame {0}")]
    MissingFrame(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Channels mapped to `[0, 1]` by dividing by 255.
    pub fn rgb_unit(&self, row: usize, col: usize) -> [f64; 3] {
        let [r, g, b] = self.pixel(row, col);
        [r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, String> {
        let mut pos = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            // skip whitespace and comments
            while pos < bytes.len() {
                if bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                } else if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if tokens[0] != "P6" {
            return Err(format!("expected magic P6, found {}", tokens[0]));
        }
        let parse = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} {s:?}"));
        let width = parse(&tokens[1], "width")?;
        let height = parse(&tokens[2], "height")?;
        let maxval = parse(&tokens[3], "maxval")?;
        if maxval != 255 {
            return Err(format!("only 8-bit PPM supported, maxval {maxval}"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let need = width * height * 3;
        if bytes.len() < pos + need {
            return Err(format!("raster has {} bytes, expected {need}", bytes.len().saturating_sub(pos)));
        }
        Ok(Self {
            width,
            height,
            data: bytes[pos..pos + need].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, ImageryError> {
        let bytes = fs::read(path).map_err(|source| ImageryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_ppm(&bytes).map_err(|detail| ImageryError::Format {
            path: path.to_path_buf(),
            detail,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), ImageryError> {
        fs::write(path, self.to_ppm()).map_err(|source| ImageryError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Frame index to PPM file mapping for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageryIndex {
    pub base_dir: PathBuf,
    pub entries: BTreeMap<u64, String>,
}

impl ImageryIndex {
    pub fn read(path: &Path) -> Result<Self, InterchangeError> {
        let text = fs::read_to_string(path).map_err(|source| InterchangeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let entries: BTreeMap<u64, String> = serde_json::from_str(&text).map_err(|e| InterchangeError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(Self {
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), InterchangeError> {
        let mut text = serde_json::to_string_pretty(&self.entries).expect("index serializes");
        text.push('\n');
        fs::write(path, text).map_err(|source| InterchangeError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(&self, frame_index: u64) -> Result<RgbImage, ImageryError> {
        let rel = self
            .entries
            .get(&frame_index)
            .ok_or(ImageryError::MissingFrame(frame_index))?;
        RgbImage::read(&self.base_dir.join(rel))
    }
}
