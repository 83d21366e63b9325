//! Trampoline skill identification from side-view video.
//!
//! The pipeline runs body extraction over a clip ([`pipeline`]), splits the
//! centroid track into bounces ([`segmentation`]), turns per-frame 2D poses
//! into twelve joint-angle trajectories ([`features`]) and labels each bounce
//! with its nearest reference under mean squared error ([`classifier`]).
//! [`synth`] generates poses and frames for testing without video.

pub mod catalog;
pub mod classifier;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod features;
pub mod frame_io;
pub mod fsutil;
pub mod pipeline;
pub mod pose;
pub mod raster;
pub mod rng;
pub mod segmentation;
pub mod synth;

pub use catalog::{parse_code, SkillCode, SkillRecord, Tariff};
pub use classifier::{classify, ClassificationResult, ReferenceSet};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use evaluation::{run_evaluation, EvalConfig, EvaluationReport};
pub use features::{extract_features, FeatureTrajectory};
pub use pipeline::{extract_routine, RoutineExtraction, TrackFile};
pub use pose::{Joint, Pose2D, PoseSequence};
pub use segmentation::{BounceSegment, CentroidTrack};
