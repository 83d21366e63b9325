//! Routine-level body extraction over a frame source.
//!
//! The background model is seeded with the per-pixel median of the first
//! few frames (a clean plate when the clip starts on an empty stage; the
//! first frame alone by default). Each frame is then masked against the
//! model and folded into it everywhere except under the athlete's
//! silhouette, so the low phases of a bounce never become background.

use serde::{Deserialize, Serialize};

use crate::config::PoseParams;
use crate::error::{Error, Result};
use crate::extraction::{
    contact_detect, detect_trampoline, extract_silhouette, foreground_mask, max_bbox_side,
    prepare_crop, AthleteCrop, BackgroundModel, ExtractionParams, LineSource, Silhouette,
    TrampolineLine,
};
use crate::features::{extract_features_with, max_shoulder_separation, FeatureTrajectory};
use crate::frame_io::{FrameSource, StreamInfo};
use crate::pose::{ensure_full_frame, smooth_poses, PoseSequence};
use crate::raster::{Frame, Point, Polygon, Rect};
use crate::segmentation::{
    attach_airborne, segment_track, BounceSegment, CentroidTrack, SegmentationParams,
};

/// One frame of an extracted routine. `silhouette` is `None` for frames
/// without a subject.
#[derive(Debug, Clone)]
pub struct AthleteFrame {
    pub index: usize,
    pub silhouette: Option<Silhouette>,
    pub in_contact: bool,
}

#[derive(Debug, Clone)]
pub struct RoutineExtraction {
    pub info: StreamInfo,
    pub line: TrampolineLine,
    pub background: Frame,
    pub frames: Vec<AthleteFrame>,
}

/// Frames in which nothing is found count as contact: the athlete is then
/// usually hidden in the bed.
fn in_contact(sil: Option<&Silhouette>, line: &TrampolineLine, margin: f64) -> bool {
    sil.is_none_or(|s| contact_detect(&s.bbox, line, margin))
}

/// Per-pixel, per-channel median of the first `frames` frames (lower
/// middle for an even count). One frame gives the first frame itself.
pub fn median_background(source: &mut dyn FrameSource, frames: usize) -> Result<Frame> {
    let info = source.info();
    let k = frames.clamp(1, info.frame_count.max(1));
    let frames = (0..k).map(|i| source.read(i)).collect::<Result<Vec<_>>>()?;
    let n = info.frame_bytes();
    let mut out = vec![0u8; n];
    let mut buf = vec![0u8; k];
    for (i, o) in out.iter_mut().enumerate() {
        for (b, f) in buf.iter_mut().zip(&frames) {
            *b = f.pixels()[i];
        }
        *o = *buf.select_nth_unstable((k - 1) / 2).1;
    }
    Frame::new(info.width, info.height, 0, out)
}

/// Seeds the background, finds the bed line and extracts every frame.
/// `line` overrides detection.
pub fn extract_routine(
    source: &mut dyn FrameSource,
    params: &ExtractionParams,
    background_frames: usize,
    line: Option<TrampolineLine>,
) -> Result<RoutineExtraction> {
    params.validate()?;
    let info = source.info();
    if info.frame_count == 0 {
        return Err(Error::NoFrames("<source>".into()));
    }
    let mut model = BackgroundModel::new(params.learning_rate)?;
    let background = median_background(source, background_frames)?;
    model.update(&background)?;
    let line = match line {
        Some(l) if l.top_row >= info.height => {
            return Err(Error::InvalidConfig(format!(
                "trampoline line {} outside frame height {}",
                l.top_row, info.height
            )))
        }
        Some(l) => l,
        None => detect_trampoline(
            &background,
            params.hue_lo,
            params.hue_hi,
            params.saturation_floor,
            params.row_coverage,
        )?,
    };
    let mut frames = Vec::with_capacity(info.frame_count);
    for i in 0..info.frame_count {
        let frame = source.read(i)?;
        let mask = foreground_mask(&model, &frame, params.threshold, Some(&line))?;
        let silhouette = extract_silhouette(&mask, params);
        model.update_excluding(&frame, silhouette.as_ref())?;
        frames.push(AthleteFrame {
            index: i,
            in_contact: in_contact(silhouette.as_ref(), &line, params.contact_margin),
            silhouette,
        });
    }
    Ok(RoutineExtraction {
        info,
        line,
        background,
        frames,
    })
}

impl RoutineExtraction {
    pub fn track(&self) -> CentroidTrack {
        CentroidTrack::new(
            self.frames
                .iter()
                .map(|f| f.silhouette.as_ref().map(|s| s.centroid))
                .collect(),
            self.info.fps,
        )
        .with_trampoline_row(self.line.top_row as f64)
    }

    pub fn contact_flags(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.in_contact).collect()
    }

    /// Side of the square athlete crops: the routine-wide largest bounding
    /// box side, rounded up.
    pub fn crop_side(&self) -> Option<usize> {
        let sils: Vec<&Silhouette> = self
            .frames
            .iter()
            .filter_map(|f| f.silhouette.as_ref())
            .collect();
        max_bbox_side(&sils).map(|s| (s.ceil() as usize).max(1))
    }

    /// Re-reads the source and hands every airborne frame's crop to `sink`.
    pub fn for_each_crop(
        &self,
        source: &mut dyn FrameSource,
        params: &ExtractionParams,
        mut sink: impl FnMut(&AthleteFrame, AthleteCrop) -> Result<()>,
    ) -> Result<usize> {
        let Some(side) = self.crop_side() else {
            return Ok(0);
        };
        let mut n = 0;
        for f in &self.frames {
            let Some(sil) = f.silhouette.as_ref().filter(|_| !f.in_contact) else {
                continue;
            };
            let frame = source.read(f.index)?;
            sink(
                f,
                prepare_crop(&frame, sil, side, params.blur_radius, params.darken),
            )?;
            n += 1;
        }
        Ok(n)
    }

    pub fn to_track_file(&self) -> TrackFile {
        TrackFile {
            width: self.info.width,
            height: self.info.height,
            fps: self.info.fps,
            trampoline_line: self.line,
            crop_side: self.crop_side(),
            frames: self
                .frames
                .iter()
                .map(|f| FrameRecord {
                    frame: f.index,
                    centroid: f.silhouette.as_ref().map(|s| s.centroid),
                    bbox: f.silhouette.as_ref().map(|s| s.bbox),
                    hull: f.silhouette.as_ref().map(|s| s.hull.clone()),
                    area: f.silhouette.as_ref().map_or(0, |s| s.area()),
                    in_contact: f.in_contact,
                })
                .collect(),
        }
    }
}

/// Serialised per-frame extraction result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    /// `null` marks a frame without a subject.
    pub centroid: Option<Point>,
    pub bbox: Option<Rect>,
    pub hull: Option<Polygon>,
    pub area: usize,
    pub in_contact: bool,
}

/// The centroid track file written by `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFile {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub trampoline_line: TrampolineLine,
    pub crop_side: Option<usize>,
    pub frames: Vec<FrameRecord>,
}

impl TrackFile {
    pub fn centroid_track(&self) -> CentroidTrack {
        CentroidTrack::new(self.frames.iter().map(|f| f.centroid).collect(), self.fps)
            .with_trampoline_row(self.trampoline_line.top_row as f64)
    }

    pub fn contact_flags(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.in_contact).collect()
    }

    /// Moves the bed line and recomputes contact flags from the stored
    /// bounding boxes.
    pub fn set_line(&mut self, top_row: usize, margin: f64) -> Result<()> {
        let line = TrampolineLine::user_adjusted(top_row, self.height)?;
        self.trampoline_line = line;
        for f in &mut self.frames {
            f.in_contact = f.bbox.is_none_or(|b| contact_detect(&b, &line, margin));
        }
        Ok(())
    }

    pub fn line_source(&self) -> LineSource {
        self.trampoline_line.source
    }
}

/// Segments a track and attaches airborne ranges from its contact flags.
pub fn segment_track_file(
    track: &TrackFile,
    params: &SegmentationParams,
) -> Result<Vec<BounceSegment>> {
    let mut segments = segment_track(&track.centroid_track(), params)?;
    attach_airborne(&mut segments, &track.contact_flags());
    Ok(segments)
}

/// Features of one routine jump.
#[derive(Debug)]
pub struct SegmentFeatures {
    /// Position of the segment in the segments list.
    pub segment: usize,
    pub trajectory: Result<FeatureTrajectory>,
}

/// Smooths the routine's poses and extracts a feature trajectory over the
/// airborne range of every routine jump. Twist is normalised by the
/// routine-wide largest shoulder separation.
pub fn routine_features(
    poses: &PoseSequence,
    segments: &[BounceSegment],
    params: &PoseParams,
) -> Result<Vec<SegmentFeatures>> {
    let full = ensure_full_frame(poses.clone())?;
    let smoothed = smooth_poses(&full, params.smooth_window, params.confidence_floor);
    let sep_max = max_shoulder_separation(&smoothed, params.confidence_floor);
    if sep_max.is_nan() || sep_max <= 0.0 {
        return Err(Error::ZeroShoulderSeparation);
    }
    Ok(segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_routine_jump)
        .map(|(k, s)| SegmentFeatures {
            segment: k,
            trajectory: s
                .airborne
                .ok_or(Error::NoAirbornePhase {
                    start: s.start,
                    end: s.end,
                })
                .and_then(|(a, b)| {
                    extract_features_with(
                        &smoothed.slice_frames(a, b),
                        sep_max,
                        params.confidence_floor,
                    )
                }),
        })
        .collect())
}
