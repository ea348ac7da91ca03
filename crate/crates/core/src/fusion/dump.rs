//! Instance dump (JSON array, no raw points) and the binary point sidecar.
//!
//! Sidecar layout (little-endian): magic `IPTS`, `u32` version, `u32`
//! instance count, then per instance `u32` id, `u32` point count and
//! `count * 3` `f32` coordinates.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::FusedInstance;
use crate::Point3;

const SIDECAR_MAGIC: &[u8; 4] = b"IPTS";
const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("point sidecar: {0}")]
    Sidecar(String),
}

pub fn write_instance_dump(path: &Path, instances: &[FusedInstance]) -> Result<(), DumpError> {
    let mut text = serde_json::to_string_pretty(instances)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_instance_dump(path: &Path) -> Result<Vec<FusedInstance>, DumpError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn write_point_sidecar(path: &Path, instances: &[FusedInstance]) -> Result<(), DumpError> {
    let mut out = Vec::new();
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    out.extend_from_slice(&(instances.len() as u32).to_le_bytes());
    for inst in instances {
        out.extend_from_slice(&inst.instance_id.to_le_bytes());
        out.extend_from_slice(&(inst.points.len() as u32).to_le_bytes());
        for p in &inst.points {
            for c in [p.x, p.y, p.z] {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// Attaches sidecar points to the matching instances by id.
pub fn read_point_sidecar(path: &Path, instances: &mut [FusedInstance]) -> Result<(), DumpError> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], DumpError> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| DumpError::Sidecar("truncated".into()))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != SIDECAR_MAGIC {
        return Err(DumpError::Sidecar("bad magic".into()));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != SIDECAR_VERSION {
        return Err(DumpError::Sidecar(format!("unsupported version {version}")));
    }
    let count = u32_at(take(4)?) as usize;
    for _ in 0..count {
        let id = u32_at(take(4)?);
        let n = u32_at(take(4)?) as usize;
        let raw = take(n.checked_mul(12).ok_or_else(|| DumpError::Sidecar("overflow".into()))?)?;
        let points: Vec<Point3> = raw
            .chunks_exact(12)
            .map(|c| {
                let f = |k: usize| f32::from_le_bytes(c[k..k + 4].try_into().unwrap()) as f64;
                Point3::new(f(0), f(4), f(8))
            })
            .collect();
        let inst = instances
            .iter_mut()
            .find(|i| i.instance_id == id)
            .ok_or_else(|| DumpError::Sidecar(format!("unknown instance id {id}")))?;
        inst.points = points;
    }
    if pos != bytes.len() {
        return Err(DumpError::Sidecar("trailing bytes".into()));
    }
    Ok(())
}
