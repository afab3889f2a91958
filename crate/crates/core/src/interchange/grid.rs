use serde::{Deserialize, Serialize};

use super::InterchangeError;

/// Dense binary mask in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitGrid {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BitGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn filled(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    /// Builds a grid from a row-major bit vector. Panics if the length does not
    /// match `height * width`.
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), height * width, "bit count must equal height * width");
        Self { height, width, bits }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self { height, width, bits }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Iterates `(row, col)` of every set pixel in scan order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / width, i % width))
    }
}

/// Run-length encoded mask: alternating runs of 0 then 1, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn height(&self) -> usize {
        self.size[0] as usize
    }

    pub fn width(&self) -> usize {
        self.size[1] as usize
    }

    /// Number of set pixels, read directly from the odd-position runs.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    /// Checks the run sum without expanding the mask.
    pub fn check(&self) -> Result<(), InterchangeError> {
        let cells = self.size[0] as u64 * self.size[1] as u64;
        let mut used: u64 = 0;
        for &c in &self.counts {
            if c > cells - used {
                return Err(InterchangeError::RleOverflow {
                    count: c,
                    remaining: cells - used,
                });
            }
            used += c;
        }
        if used != cells {
            return Err(InterchangeError::RleSumMismatch {
                sum: used,
                expected: cells,
            });
        }
        Ok(())
    }

    /// True when no run other than the leading one is zero.
    pub fn is_canonical(&self) -> bool {
        self.counts.iter().skip(1).all(|&c| c > 0)
    }
}

pub fn decode_rle(mask: &RleMask) -> Result<BitGrid, InterchangeError> {
    mask.check()?;
    let (h, w) = (mask.height(), mask.width());
    let mut bits = Vec::with_capacity(h * w);
    let mut value = false;
    for &c in &mask.counts {
        bits.extend(std::iter::repeat_n(value, c as usize));
        value = !value;
    }
    Ok(BitGrid::from_bits(h, w, bits))
}

pub fn encode_rle(grid: &BitGrid) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run: u64 = 0;
    for &b in grid.bits() {
        if b == current {
            run += 1;
        } else {
            counts.push(run);
            current = b;
            run = 1;
        }
    }
    counts.push(run);
    RleMask {
        size: [grid.height() as u32, grid.width() as u32],
        counts,
    }
}
