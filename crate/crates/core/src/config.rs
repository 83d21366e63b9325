//! Pipeline configuration file: every tunable default in one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::extraction::ExtractionParams;
use crate::pose::DEFAULT_CONFIDENCE_FLOOR;
use crate::segmentation::SegmentationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseParams {
    /// Moving-average window over frames; 1 disables smoothing.
    pub smooth_window: usize,
    pub confidence_floor: f64,
}

impl Default for PoseParams {
    fn default() -> Self {
        PoseParams {
            smooth_window: 5,
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub extraction: ExtractionParams,
    /// Leading frames whose median seeds the background model.
    pub background_frames: usize,
    pub segmentation: SegmentationParams,
    pub pose: PoseParams,
    pub evaluation: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            extraction: ExtractionParams::default(),
            background_frames: 1,
            segmentation: SegmentationParams::default(),
            pose: PoseParams::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.extraction.validate()?;
        self.evaluation.validate()?;
        if self.background_frames == 0 {
            return Err(Error::InvalidConfig(
                "background_frames must be at least 1".into(),
            ));
        }
        if self.pose.smooth_window == 0 {
            return Err(Error::InvalidConfig(
                "pose.smooth_window must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.pose.confidence_floor) {
            return Err(Error::InvalidConfig(
                "pose.confidence_floor must be in [0, 1]".into(),
            ));
        }
        let s = &self.segmentation;
        if s.smooth_window == 0 {
            return Err(Error::InvalidConfig(
                "segmentation.smooth_window must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&s.apex_threshold) {
            return Err(Error::InvalidConfig(
                "segmentation.apex_threshold must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Reads a config file; missing keys take their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
