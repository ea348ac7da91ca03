//! Run-length encoded binary masks over row-major pixel order.
//!
//! File layout (little-endian `u32`): width, height, run count, then
//! `(start, length)` pairs.

use std::path::Path;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use super::raster::pixel_count;
use super::DepthError;

pub type PixelBits = BitVec<u64, Lsb0>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    width: u32,
    height: u32,
    runs: Vec<(u32, u32)>,
}

impl RleMask {
    /// Validates that runs are sorted, non-empty, non-overlapping and in bounds.
    pub fn new(width: u32, height: u32, runs: Vec<(u32, u32)>) -> Result<Self, DepthError> {
        let n = pixel_count(width, height)? as u64;
        let mut prev_end = 0u64;
        for (i, &(start, len)) in runs.iter().enumerate() {
            if len == 0 {
                return Err(DepthError::InvalidRun {
                    index: i,
                    reason: "zero-length run",
                });
            }
            let (start, end) = (start as u64, start as u64 + len as u64);
            if start < prev_end {
                return Err(DepthError::InvalidRun {
                    index: i,
                    reason: "runs unsorted or overlapping",
                });
            }
            if end > n {
                return Err(DepthError::InvalidRun {
                    index: i,
                    reason: "run exceeds mask bounds",
                });
            }
            prev_end = end;
        }
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self, DepthError> {
        Self::new(width, height, Vec::new())
    }

    /// Axis-aligned pixel rectangle `[x0, x1) × [y0, y1)`.
    pub fn rect(width: u32, height: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, DepthError> {
        let mut runs = Vec::new();
        if x1 > x0 {
            for y in y0..y1 {
                runs.push((y * width + x0, x1 - x0));
            }
        }
        Self::new(width, height, runs)
    }

    pub fn from_bits(width: u32, height: u32, bits: &BitSlice<u64, Lsb0>) -> Result<Self, DepthError> {
        let n = pixel_count(width, height)?;
        if bits.len() != n {
            return Err(DepthError::LengthMismatch {
                expected: n,
                actual: bits.len(),
            });
        }
        let mut runs = Vec::new();
        let mut i = 0;
        while let Some(off) = bits[i..].first_one() {
            let start = i + off;
            let len = bits[start..].first_zero().unwrap_or(n - start);
            runs.push((start as u32, len as u32));
            i = start + len;
        }
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[(u32, u32)] {
        &self.runs
    }

    pub fn count(&self) -> usize {
        self.runs.iter().map(|r| r.1 as usize).sum()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.runs
            .iter()
            .flat_map(|&(s, l)| (s as usize)..(s as usize + l as usize))
    }

    pub fn decode(&self) -> PixelBits {
        let n = self.width as usize * self.height as usize;
        let mut bits = bitvec![u64, Lsb0; 0; n];
        for &(s, l) in &self.runs {
            bits[s as usize..(s + l) as usize].fill(true);
        }
        bits
    }

    pub fn encode_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.runs.len());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&(self.runs.len() as u32).to_le_bytes());
        for &(s, l) in &self.runs {
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn decode_bytes(bytes: &[u8]) -> Result<Self, DepthError> {
        let word = |i: usize| -> Result<u32, DepthError> {
            bytes
                .get(i * 4..i * 4 + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or(DepthError::Truncated {
                    expected: i * 4 + 4,
                    actual: bytes.len(),
                })
        };
        let (width, height, count) = (word(0)?, word(1)?, word(2)? as usize);
        let expected = count
            .checked_mul(8)
            .and_then(|n| n.checked_add(12))
            .ok_or(DepthError::DimensionOverflow { width, height })?;
        if bytes.len() < expected {
            return Err(DepthError::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(DepthError::TrailingBytes {
                expected,
                actual: bytes.len(),
            });
        }
        let runs = (0..count)
            .map(|k| Ok((word(3 + 2 * k)?, word(4 + 2 * k)?)))
            .collect::<Result<Vec<_>, DepthError>>()?;
        Self::new(width, height, runs)
    }

    pub fn write(&self, path: &Path) -> Result<(), DepthError> {
        std::fs::write(path, self.encode_bytes())?;
        Ok(())
    }
}

pub fn read_mask(path: &Path) -> Result<RleMask, DepthError> {
    RleMask::decode_bytes(&std::fs::read(path)?)
}

pub fn decode_mask(mask: &RleMask) -> PixelBits {
    mask.decode()
}
