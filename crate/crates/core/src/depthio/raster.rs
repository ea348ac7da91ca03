//! `XYZR` world-coordinate rasters.
//!
//! Layout (little-endian): magic `XYZR`, `u16` version, `u32` width,
//! `u32` height, then `width * height` triplets of `f32`. A pixel with all
//! three components NaN is the invalid sentinel.

use std::io::Write;
use std::path::Path;

use super::DepthError;
use crate::Point3;

pub const MAGIC: &[u8; 4] = b"XYZR";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4;

#[derive(Debug, Clone)]
pub struct XyzRaster {
    width: u32,
    height: u32,
    data: Vec<[f32; 3]>,
}

pub const SENTINEL: [f32; 3] = [f32::NAN, f32::NAN, f32::NAN];

pub fn is_sentinel(p: &[f32; 3]) -> bool {
    p.iter().all(|c| c.is_nan())
}

impl XyzRaster {
    pub fn new(width: u32, height: u32, data: Vec<[f32; 3]>) -> Result<Self, DepthError> {
        let expected = pixel_count(width, height)?;
        if data.len() != expected {
            return Err(DepthError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data
            .iter()
            .position(|p| !is_sentinel(p) && p.iter().any(|c| !c.is_finite()))
        {
            return Err(DepthError::NonFinitePixel(i));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: [f32; 3]) -> Result<Self, DepthError> {
        let n = pixel_count(width, height)?;
        Self::new(width, height, vec![value; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn get(&self, index: usize) -> Option<Point3> {
        let p = self.data.get(index)?;
        (!is_sentinel(p)).then(|| Point3::new(p[0] as f64, p[1] as f64, p[2] as f64))
    }

    pub fn set(&mut self, index: usize, value: [f32; 3]) -> Result<(), DepthError> {
        if !is_sentinel(&value) && value.iter().any(|c| !c.is_finite()) {
            return Err(DepthError::NonFinitePixel(index));
        }
        self.data[index] = value;
        Ok(())
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|p| !is_sentinel(p)).count()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DepthError> {
        if bytes.len() < HEADER_LEN {
            return Err(DepthError::Truncated {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        if &bytes[0..4] != MAGIC {
            return Err(DepthError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(DepthError::UnsupportedVersion(version));
        }
        let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
        let n = pixel_count(width, height)?;
        let payload = n
            .checked_mul(12)
            .and_then(|p| p.checked_add(HEADER_LEN))
            .ok_or(DepthError::DimensionOverflow { width, height })?;
        if bytes.len() < payload {
            return Err(DepthError::Truncated {
                expected: payload,
                actual: bytes.len(),
            });
        }
        if bytes.len() > payload {
            return Err(DepthError::TrailingBytes {
                expected: payload,
                actual: bytes.len(),
            });
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(12)
            .map(|c| {
                [
                    f32::from_le_bytes(c[0..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..8].try_into().unwrap()),
                    f32::from_le_bytes(c[8..12].try_into().unwrap()),
                ]
            })
            .collect();
        Self::new(width, height, data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 12);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for p in &self.data {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DepthError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.encode())?;
        f.flush()?;
        Ok(())
    }
}

pub fn read_xyz_raster(path: &Path) -> Result<XyzRaster, DepthError> {
    XyzRaster::decode(&std::fs::read(path)?)
}

pub(crate) fn pixel_count(width: u32, height: u32) -> Result<usize, DepthError> {
    (width as usize)
        .checked_mul(height as usize)
        .filter(|&n| n.checked_mul(12).is_some())
        .ok_or(DepthError::DimensionOverflow { width, height })
}
