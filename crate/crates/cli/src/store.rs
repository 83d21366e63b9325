//! On-disk layout of a data directory.
//!
//! ```text
//! <data>/reference_set.json
//! <data>/evaluation/latest.json
//! <data>/routines/<id>/routine.json
//! <data>/routines/<id>/track.json
//! <data>/routines/<id>/segments.json
//! <data>/routines/<id>/poses.jsonl            (optional)
//! <data>/routines/<id>/crops/frame_000123.png (+ .json overlay)
//! <data>/routines/<id>/features/segment_004.json
//! ```
//!
//! Every file is replaced by atomic rename, so readers never see a partial
//! write.

use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hasher};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bounce_core::extraction::TrampolineLine;
use bounce_core::fsutil::write_atomic;
use bounce_core::raster::{Point, Rect};
use bounce_core::SkillCode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const ROUTINES_DIR: &str = "routines";
pub const REFERENCE_SET_FILE: &str = "reference_set.json";
pub const LATEST_EVALUATION: &str = "evaluation/latest.json";

/// Per-routine index kept next to the pipeline artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineRecord {
    pub id: String,
    /// Where the frames came from.
    pub source: Option<String>,
    pub frame_count: usize,
    pub fps: f64,
    pub trampoline_line: TrampolineLine,
    /// Segment position -> assigned label.
    #[serde(default)]
    pub labels: BTreeMap<usize, SkillCode>,
}

/// Overlay metadata stored beside each crop, in crop-local pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropOverlay {
    pub frame: usize,
    /// Full-frame position of the crop's top-left pixel.
    pub origin: (i64, i64),
    pub side: usize,
    pub centroid: Point,
    pub bbox: Rect,
    pub hull: Vec<Point>,
    /// Bed line row relative to the crop; may fall outside it.
    pub trampoline_row: i64,
}

/// Ids become directory names and URL segments.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Clone)]
pub struct RoutinePaths {
    pub dir: PathBuf,
}

impl RoutinePaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RoutinePaths { dir: dir.into() }
    }

    pub fn in_data_dir(data: &Path, id: &str) -> Self {
        Self::new(data.join(ROUTINES_DIR).join(id))
    }

    pub fn record(&self) -> PathBuf {
        self.dir.join("routine.json")
    }

    pub fn track(&self) -> PathBuf {
        self.dir.join("track.json")
    }

    pub fn segments(&self) -> PathBuf {
        self.dir.join("segments.json")
    }

    pub fn poses(&self) -> PathBuf {
        self.dir.join("poses.jsonl")
    }

    pub fn crops(&self) -> PathBuf {
        self.dir.join("crops")
    }

    pub fn crop(&self, frame: usize) -> PathBuf {
        self.crops().join(format!("frame_{frame:06}.png"))
    }

    pub fn overlay(&self, frame: usize) -> PathBuf {
        self.crops().join(format!("frame_{frame:06}.json"))
    }

    pub fn features_dir(&self) -> PathBuf {
        self.dir.join("features")
    }

    pub fn features(&self, segment: usize) -> PathBuf {
        feature_file(&self.features_dir(), segment)
    }
}

pub fn feature_file(dir: &Path, segment: usize) -> PathBuf {
    dir.join(format!("segment_{segment:03}.json"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

/// Opaque revision token for a document's bytes, quoted as an HTTP ETag.
pub fn revision_of(bytes: &[u8]) -> String {
    let mut h = DefaultHasher::new();
    h.write(bytes);
    format!("\"{:016x}\"", h.finish())
}

/// Ids of every routine directory holding a `routine.json`, sorted.
pub fn list_routines(data: &Path) -> Result<Vec<String>> {
    let dir = data.join(ROUTINES_DIR);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if valid_id(&name) && entry.path().join("routine.json").is_file() {
            ids.push(name);
        }
    }
    ids.sort();
    Ok(ids)
}
