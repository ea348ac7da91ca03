use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::ClassId;

pub const DETECTION_SCHEMA: &str = "insight-det/1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Upstream producer of a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Sam3,
    Yoloe,
    Obj365Nano,
    SafetyNano,
    Ocr,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::Sam3,
        Source::Yoloe,
        Source::Obj365Nano,
        Source::SafetyNano,
        Source::Ocr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Sam3 => "sam3",
            Source::Yoloe => "yoloe",
            Source::Obj365Nano => "obj365_nano",
            Source::SafetyNano => "safety_nano",
            Source::Ocr => "ocr",
        }
    }

    pub fn is_visual(self) -> bool {
        self != Source::Ocr
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Unverified,
    Accepted,
    Rejected,
}

/// Pixel box `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Box2d(pub [f64; 4]);

impl Box2d {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self([x_min, y_min, x_max, y_max])
    }

    pub fn is_valid(&self) -> bool {
        let [x0, y0, x1, y1] = self.0;
        self.0.iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1
    }

    pub fn area(&self) -> f64 {
        let [x0, y0, x1, y1] = self.0;
        (x1 - x0) * (y1 - y0)
    }

    pub fn center(&self) -> (f64, f64) {
        let [x0, y0, x1, y1] = self.0;
        ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub schema: String,
    pub image_id: String,
    pub area_id: String,
    pub class: ClassId,
    pub box2d: Box2d,
    /// RLE mask file, relative to the file holding the record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub confidence: f64,
    pub source: Source,
    #[serde(default)]
    pub verifier_verdict: Verdict,
}

impl DetectionRecord {
    pub fn new(
        image_id: impl Into<String>,
        area_id: impl Into<String>,
        class: ClassId,
        box2d: Box2d,
        confidence: f64,
        source: Source,
    ) -> Self {
        Self {
            schema: DETECTION_SCHEMA.to_string(),
            image_id: image_id.into(),
            area_id: area_id.into(),
            class,
            box2d,
            mask: None,
            confidence,
            source,
            verifier_verdict: Verdict::Unverified,
        }
    }
}

/// Same shape as [`DetectionRecord`] with the class still a raw token, so
/// an unknown class rejects one record instead of failing the file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    schema: String,
    image_id: String,
    area_id: String,
    class: String,
    box2d: [f64; 4],
    #[serde(default)]
    mask: Option<String>,
    confidence: f64,
    source: Source,
    #[serde(default)]
    verifier_verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDetections {
    pub records: Vec<DetectionRecord>,
    pub rejected: Vec<Rejection>,
}

fn validate(raw: RawRecord) -> Result<DetectionRecord, String> {
    if raw.schema != DETECTION_SCHEMA {
        return Err(format!("unsupported schema `{}`", raw.schema));
    }
    let class = ClassId::from_name(&raw.class).ok_or_else(|| format!("unknown class `{}`", raw.class))?;
    if !(0.0..=1.0).contains(&raw.confidence) {
        return Err(format!("confidence {} outside [0, 1]", raw.confidence));
    }
    let box2d = Box2d(raw.box2d);
    if !box2d.is_valid() {
        return Err(format!("degenerate box {:?}", raw.box2d));
    }
    Ok(DetectionRecord {
        schema: raw.schema,
        image_id: raw.image_id,
        area_id: raw.area_id,
        class,
        box2d,
        mask: raw.mask,
        confidence: raw.confidence,
        source: raw.source,
        verifier_verdict: raw.verifier_verdict,
    })
}

pub fn parse_detections(path: &Path, reader: impl BufRead) -> Result<LoadedDetections, IngestError> {
    let mut out = LoadedDetections::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        match validate(raw) {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejected.push(Rejection {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<LoadedDetections, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_detections(path, BufReader::new(file))
}

pub fn write_detections(mut w: impl Write, records: &[DetectionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
