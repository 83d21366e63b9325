//! 2D pose keypoints from an external estimator.
//!
//! The wire format is JSON lines, one frame per line, with an optional
//! header line first:
//!
//! ```text
//! {"fps": 30.0, "coords": "full", "origin_per_frame": false}
//! {"frame": 0, "joints": [[x, y, conf], ... 16 entries]}
//! ```
//!
//! Crop-local streams set `"coords": "crop"` and `"origin_per_frame": true`
//! and carry `"origin": [x, y]` on every frame line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINT_COUNT: usize = 16;
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.2;

/// MPII joint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum Joint {
    RightAnkle = 0,
    RightKnee = 1,
    RightHip = 2,
    LeftHip = 3,
    LeftKnee = 4,
    LeftAnkle = 5,
    Pelvis = 6,
    Thorax = 7,
    UpperNeck = 8,
    HeadTop = 9,
    RightWrist = 10,
    RightElbow = 11,
    RightShoulder = 12,
    LeftShoulder = 13,
    LeftElbow = 14,
    LeftWrist = 15,
}

impl Joint {
    pub const ALL: [Joint; JOINT_COUNT] = [
        Joint::RightAnkle,
        Joint::RightKnee,
        Joint::RightHip,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::Pelvis,
        Joint::Thorax,
        Joint::UpperNeck,
        Joint::HeadTop,
        Joint::RightWrist,
        Joint::RightElbow,
        Joint::RightShoulder,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
    ];

    /// The same joint on the other side of the body.
    pub fn mirrored(self) -> Joint {
        use Joint::*;
        match self {
            RightAnkle => LeftAnkle,
            RightKnee => LeftKnee,
            RightHip => LeftHip,
            LeftHip => RightHip,
            LeftKnee => RightKnee,
            LeftAnkle => RightAnkle,
            RightWrist => LeftWrist,
            RightElbow => LeftElbow,
            RightShoulder => LeftShoulder,
            LeftShoulder => RightShoulder,
            LeftElbow => RightElbow,
            LeftWrist => RightWrist,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, confidence: f64) -> Self {
        Keypoint { x, y, confidence }
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from(v: [f64; 3]) -> Self {
        Keypoint::new(v[0], v[1], v[2])
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.confidence]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub joints: [Keypoint; JOINT_COUNT],
}

impl Pose2D {
    pub fn joint(&self, j: Joint) -> Keypoint {
        self.joints[j as usize]
    }

    pub fn joint_mut(&mut self, j: Joint) -> &mut Keypoint {
        &mut self.joints[j as usize]
    }

    /// Checks the per-pose invariants: finite coordinates and confidence in
    /// [0, 1].
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (i, k) in self.joints.iter().enumerate() {
            if !k.x.is_finite() || !k.y.is_finite() {
                return Err(format!("joint {i} has a non-finite coordinate"));
            }
            if !(0.0..=1.0).contains(&k.confidence) {
                return Err(format!(
                    "joint {i} confidence {} outside [0, 1]",
                    k.confidence
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordSpace {
    Full,
    Crop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub index: usize,
    pub pose: Pose2D,
    /// Crop origin in full-frame pixels, for crop-local coordinates.
    pub origin: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<PoseFrame>,
    pub fps: f64,
    pub coords: CoordSpace,
}

impl PoseSequence {
    pub fn new(frames: Vec<PoseFrame>, fps: f64) -> Self {
        PoseSequence {
            frames,
            fps,
            coords: CoordSpace::Full,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames whose index lies in `first..=last`.
    pub fn slice_frames(&self, first: usize, last: usize) -> PoseSequence {
        PoseSequence {
            frames: self
                .frames
                .iter()
                .filter(|f| f.index >= first && f.index <= last)
                .cloned()
                .collect(),
            fps: self.fps,
            coords: self.coords.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    fps: f64,
    #[serde(default = "default_coords")]
    coords: CoordSpace,
    #[serde(default)]
    origin_per_frame: bool,
}

fn default_coords() -> CoordSpace {
    CoordSpace::Full
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameLine {
    frame: usize,
    joints: Vec<Keypoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<[f64; 2]>,
}

pub const DEFAULT_FPS: f64 = 30.0;

/// Parses a pose stream from text. `path` is only used in error messages.
pub fn parse_pose_sequence(text: &str, path: &Path) -> Result<PoseSequence> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut fps = DEFAULT_FPS;
    let mut coords = CoordSpace::Full;
    let mut origin_per_frame = false;
    let mut frames: Vec<PoseFrame> = Vec::new();
    let mut seen_frame = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| err(lineno, e.to_string()))?;
        if !seen_frame && value.get("frame").is_none() && value.get("fps").is_some() {
            let h: HeaderLine =
                serde_json::from_value(value).map_err(|e| err(lineno, e.to_string()))?;
            if !(h.fps.is_finite() && h.fps > 0.0) {
                return Err(err(lineno, format!("fps must be positive, got {}", h.fps)));
            }
            fps = h.fps;
            coords = h.coords;
            origin_per_frame = h.origin_per_frame;
            continue;
        }
        seen_frame = true;
        let fl: FrameLine =
            serde_json::from_value(value).map_err(|e| err(lineno, e.to_string()))?;
        if fl.joints.len() != JOINT_COUNT {
            return Err(err(
                lineno,
                format!("expected {JOINT_COUNT} joints, found {}", fl.joints.len()),
            ));
        }
        let joints: [Keypoint; JOINT_COUNT] = fl.joints.try_into().expect("length checked");
        let pose = Pose2D { joints };
        pose.validate().map_err(|m| err(lineno, m))?;
        if let Some(prev) = frames.last() {
            if fl.frame <= prev.index {
                return Err(err(
                    lineno,
                    format!(
                        "frame index {} does not increase after {}",
                        fl.frame, prev.index
                    ),
                ));
            }
        }
        if origin_per_frame && fl.origin.is_none() {
            return Err(err(lineno, "missing crop origin".into()));
        }
        frames.push(PoseFrame {
            index: fl.frame,
            pose,
            origin: fl.origin.map(|[x, y]| (x, y)),
        });
    }
    Ok(PoseSequence {
        frames,
        fps,
        coords,
    })
}

pub fn load_pose_sequence(path: impl AsRef<Path>) -> Result<PoseSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose_sequence(&text, path)
}

/// Serialises a sequence in the JSON-lines format, header first.
pub fn format_pose_sequence(seq: &PoseSequence) -> String {
    let origin_per_frame = seq.frames.iter().any(|f| f.origin.is_some());
    let header = HeaderLine {
        fps: seq.fps,
        coords: seq.coords.clone(),
        origin_per_frame,
    };
    let mut out = serde_json::to_string(&header).expect("header serialises");
    out.push('\n');
    for f in &seq.frames {
        let line = FrameLine {
            frame: f.index,
            joints: f.pose.joints.to_vec(),
            origin: f.origin.map(|(x, y)| [x, y]),
        };
        out.push_str(&serde_json::to_string(&line).expect("frame serialises"));
        out.push('\n');
    }
    out
}

pub fn write_pose_sequence(seq: &PoseSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(format_pose_sequence(seq).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Centred, confidence-weighted moving average per joint and coordinate.
/// The window shrinks symmetrically near the ends of the sequence.
///
/// Joints below `confidence_floor` are left out of every average; a frame
/// whose window holds no confident sample gets its position interpolated
/// from neighbouring smoothed frames and its confidence set to the floor.
/// A window of 1 returns the input unchanged.
pub fn smooth_poses(seq: &PoseSequence, window: usize, confidence_floor: f64) -> PoseSequence {
    assert!(
        window >= 1 && window % 2 == 1,
        "window must be odd and positive"
    );
    if window == 1 || seq.frames.is_empty() {
        return seq.clone();
    }
    let half = window / 2;
    let n = seq.frames.len();
    let mut out = seq.clone();
    for j in 0..JOINT_COUNT {
        let mut xs: Vec<Option<f64>> = vec![None; n];
        let mut ys: Vec<Option<f64>> = vec![None; n];
        let mut cs: Vec<f64> = vec![0.0; n];
        for i in 0..n {
            let h = half.min(i).min(n - 1 - i);
            let (lo, hi) = (i - h, i + h);
            let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
            for f in &seq.frames[lo..=hi] {
                let k = f.pose.joints[j];
                if k.confidence >= confidence_floor {
                    sw += k.confidence;
                    sx += k.confidence * k.x;
                    sy += k.confidence * k.y;
                }
            }
            if sw > 0.0 {
                xs[i] = Some(sx / sw);
                ys[i] = Some(sy / sw);
                cs[i] = seq.frames[i].pose.joints[j]
                    .confidence
                    .max(confidence_floor);
            }
        }
        let fx = crate::segmentation::fill_gaps(&xs);
        let fy = crate::segmentation::fill_gaps(&ys);
        if let (Some(fx), Some(fy)) = (fx, fy) {
            for i in 0..n {
                let k = &mut out.frames[i].pose.joints[j];
                k.x = fx[i];
                k.y = fy[i];
                k.confidence = if xs[i].is_some() {
                    cs[i]
                } else {
                    confidence_floor
                };
            }
        }
    }
    out
}

/// Converts crop-local coordinates to full-frame pixels by adding each
/// frame's crop origin. `origins` overrides origins stored in the frames.
pub fn to_full_frame(
    seq: &PoseSequence,
    origins: &BTreeMap<usize, (f64, f64)>,
) -> Result<PoseSequence> {
    let mut out = seq.clone();
    for f in &mut out.frames {
        let (ox, oy) =
            origins.get(&f.index).copied().or(f.origin).ok_or_else(|| {
                Error::InvalidPose(format!("no crop origin for frame {}", f.index))
            })?;
        for k in &mut f.pose.joints {
            k.x += ox;
            k.y += oy;
        }
        f.origin = Some((ox, oy));
    }
    out.coords = CoordSpace::Full;
    Ok(out)
}

/// Inverse of [`to_full_frame`].
pub fn to_crop_coordinates(
    seq: &PoseSequence,
    origins: &BTreeMap<usize, (f64, f64)>,
) -> Result<PoseSequence> {
    let mut out = seq.clone();
    for f in &mut out.frames {
        let (ox, oy) =
            origins.get(&f.index).copied().or(f.origin).ok_or_else(|| {
                Error::InvalidPose(format!("no crop origin for frame {}", f.index))
            })?;
        for k in &mut f.pose.joints {
            k.x -= ox;
            k.y -= oy;
        }
        f.origin = Some((ox, oy));
    }
    out.coords = CoordSpace::Crop;
    Ok(out)
}

/// Brings a sequence into full-frame coordinates using the origins it
/// carries.
pub fn ensure_full_frame(seq: PoseSequence) -> Result<PoseSequence> {
    match seq.coords {
        CoordSpace::Full => Ok(seq),
        CoordSpace::Crop => to_full_frame(&seq, &BTreeMap::new()),
    }
}
