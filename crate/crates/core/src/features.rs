//! The twelve feature angles computed from a 2D pose.
//!
//! | column | feature |
//! |--------|---------|
//! | 0, 1   | right, left elbow |
//! | 2, 3   | right, left shoulder |
//! | 4, 5   | right, left hip |
//! | 6, 7   | right, left knee |
//! | 8, 9   | right, left leg |
//! | 10     | torso |
//! | 11     | twist |
//!
//! Image coordinates have y pointing down. Torso and leg orientations are
//! positive clockwise on screen; torso is measured from image-up, legs from
//! image-down. Both are unwrapped over a segment so rotation accumulates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Joint, Keypoint, Pose2D, PoseSequence, DEFAULT_CONFIDENCE_FLOOR};
use crate::segmentation::fill_gaps;

pub const FEATURE_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    RightElbow,
    LeftElbow,
    RightShoulder,
    LeftShoulder,
    RightHip,
    LeftHip,
    RightKnee,
    LeftKnee,
    RightLeg,
    LeftLeg,
    Torso,
    Twist,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::RightElbow,
        Feature::LeftElbow,
        Feature::RightShoulder,
        Feature::LeftShoulder,
        Feature::RightHip,
        Feature::LeftHip,
        Feature::RightKnee,
        Feature::LeftKnee,
        Feature::RightLeg,
        Feature::LeftLeg,
        Feature::Torso,
        Feature::Twist,
    ];

    pub fn column(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::RightElbow => "right elbow",
            Feature::LeftElbow => "left elbow",
            Feature::RightShoulder => "right shoulder",
            Feature::LeftShoulder => "left shoulder",
            Feature::RightHip => "right hip",
            Feature::LeftHip => "left hip",
            Feature::RightKnee => "right knee",
            Feature::LeftKnee => "left knee",
            Feature::RightLeg => "right leg",
            Feature::LeftLeg => "left leg",
            Feature::Torso => "torso",
            Feature::Twist => "twist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

pub type FeatureVector = [f64; FEATURE_COUNT];

/// `T` rows of the twelve angles, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrajectory {
    #[serde(default)]
    pub skill_ref: Option<String>,
    pub fps: f64,
    pub angles: Vec<FeatureVector>,
}

impl FeatureTrajectory {
    pub fn new(angles: Vec<FeatureVector>, fps: f64) -> Self {
        FeatureTrajectory {
            skill_ref: None,
            fps,
            angles,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn column(&self, feature: Feature) -> Vec<f64> {
        self.angles
            .iter()
            .map(|row| row[feature.column()])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.len() < 2 {
            return Err(Error::TrajectoryTooShort(self.angles.len()));
        }
        if self.angles.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose(
                "trajectory contains a non-finite angle".into(),
            ));
        }
        Ok(())
    }
}

const DEGENERATE_EPS: f64 = 1e-6;

/// Interior angle at `b` between rays `b->a` and `b->c`, in [0, 180].
pub fn joint_angle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Result<f64> {
    let u = (a.0 - b.0, a.1 - b.1);
    let v = (c.0 - b.0, c.1 - b.1);
    if u.0.hypot(u.1) < DEGENERATE_EPS || v.0.hypot(v.1) < DEGENERATE_EPS {
        return Err(Error::DegenerateGeometry("coincident joint positions"));
    }
    let cross = u.0 * v.1 - u.1 * v.0;
    let dot = u.0 * v.0 + u.1 * v.1;
    Ok(cross.abs().atan2(dot).to_degrees())
}

/// Signed angle of `to - from` relative to image-up, clockwise positive,
/// in (-180, 180].
fn orientation_from_up(from: Keypoint, to: Keypoint) -> f64 {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    dx.atan2(-dy).to_degrees()
}

/// Pelvis-to-thorax orientation from image-up.
pub fn torso_angle(pose: &Pose2D) -> f64 {
    orientation_from_up(pose.joint(Joint::Pelvis), pose.joint(Joint::Thorax))
}

/// Hip-to-ankle orientation from image-down, same sign convention as the
/// torso.
pub fn leg_angle(pose: &Pose2D, side: Side) -> f64 {
    let (hip, ankle) = match side {
        Side::Right => (Joint::RightHip, Joint::RightAnkle),
        Side::Left => (Joint::LeftHip, Joint::LeftAnkle),
    };
    let (h, a) = (pose.joint(hip), pose.joint(ankle));
    // Clockwise from image-down.
    (h.x - a.x).atan2(a.y - h.y).to_degrees()
}

/// Removes jumps larger than 180 degrees between consecutive samples.
pub fn unwrap(series: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(series.len());
    let mut offset = 0.0;
    for (i, &v) in series.iter().enumerate() {
        if i > 0 {
            let step = v + offset - out[i - 1];
            if step.abs() > 180.0 {
                offset -= 360.0 * (step / 360.0).round();
            }
        }
        out.push(v + offset);
    }
    out
}

pub fn shoulder_separation(pose: &Pose2D) -> f64 {
    let (r, l) = (
        pose.joint(Joint::RightShoulder),
        pose.joint(Joint::LeftShoulder),
    );
    (r.x - l.x).hypot(r.y - l.y)
}

fn confident(k: Keypoint, floor: f64) -> bool {
    k.confidence >= floor
}

/// Largest shoulder separation over frames where both shoulders are
/// confidently located.
pub fn max_shoulder_separation(seq: &PoseSequence, floor: f64) -> f64 {
    seq.frames
        .iter()
        .filter(|f| {
            confident(f.pose.joint(Joint::RightShoulder), floor)
                && confident(f.pose.joint(Joint::LeftShoulder), floor)
        })
        .map(|f| shoulder_separation(&f.pose))
        .fold(0.0, f64::max)
}

/// Twist from normalised shoulder separation: `acos(sep / sep_max)` lies in
/// [0, 90]; when the right shoulder is to the image-left of the left one the
/// angle is reflected to `180 - acos(...)`.
pub fn twist_angle(pose: &Pose2D, sep_max: f64) -> f64 {
    let ratio = (shoulder_separation(pose) / sep_max).clamp(0.0, 1.0);
    let base = ratio.acos().to_degrees();
    if pose.joint(Joint::RightShoulder).x < pose.joint(Joint::LeftShoulder).x {
        180.0 - base
    } else {
        base
    }
}

/// Twist over a whole routine, normalised by the routine's own maximum
/// separation.
pub fn twist_trajectory(seq: &PoseSequence) -> Result<Vec<f64>> {
    let sep_max = max_shoulder_separation(seq, 0.0);
    if sep_max <= 0.0 {
        return Err(Error::ZeroShoulderSeparation);
    }
    Ok(seq
        .frames
        .iter()
        .map(|f| twist_angle(&f.pose, sep_max))
        .collect())
}

fn xy(k: Keypoint) -> (f64, f64) {
    (k.x, k.y)
}

fn angle_at(pose: &Pose2D, a: Joint, b: Joint, c: Joint, floor: f64) -> Option<f64> {
    let (ka, kb, kc) = (pose.joint(a), pose.joint(b), pose.joint(c));
    if !(confident(ka, floor) && confident(kb, floor) && confident(kc, floor)) {
        return None;
    }
    joint_angle(xy(ka), xy(kb), xy(kc)).ok()
}

fn raw_features(pose: &Pose2D, sep_max: f64, floor: f64) -> [Option<f64>; FEATURE_COUNT] {
    use Joint::*;
    let ok = |joints: &[Joint]| joints.iter().all(|&j| confident(pose.joint(j), floor));
    [
        angle_at(pose, RightShoulder, RightElbow, RightWrist, floor),
        angle_at(pose, LeftShoulder, LeftElbow, LeftWrist, floor),
        angle_at(pose, RightElbow, RightShoulder, RightHip, floor),
        angle_at(pose, LeftElbow, LeftShoulder, LeftHip, floor),
        angle_at(pose, RightShoulder, RightHip, RightKnee, floor),
        angle_at(pose, LeftShoulder, LeftHip, LeftKnee, floor),
        angle_at(pose, RightHip, RightKnee, RightAnkle, floor),
        angle_at(pose, LeftHip, LeftKnee, LeftAnkle, floor),
        ok(&[RightHip, RightAnkle]).then(|| leg_angle(pose, Side::Right)),
        ok(&[LeftHip, LeftAnkle]).then(|| leg_angle(pose, Side::Left)),
        ok(&[Pelvis, Thorax]).then(|| torso_angle(pose)),
        ok(&[RightShoulder, LeftShoulder]).then(|| twist_angle(pose, sep_max)),
    ]
}

/// Feature trajectory of one airborne segment with the default confidence
/// floor.
pub fn extract_features(seq: &PoseSequence, routine_sep_max: f64) -> Result<FeatureTrajectory> {
    extract_features_with(seq, routine_sep_max, DEFAULT_CONFIDENCE_FLOOR)
}

/// Computes all twelve angles per frame. Leg and torso orientations are
/// unwrapped across the valid frames; frames where an angle cannot be
/// computed are filled by linear interpolation in angle space.
pub fn extract_features_with(
    seq: &PoseSequence,
    routine_sep_max: f64,
    confidence_floor: f64,
) -> Result<FeatureTrajectory> {
    if seq.len() < 2 {
        return Err(Error::TrajectoryTooShort(seq.len()));
    }
    if routine_sep_max.is_nan() || routine_sep_max <= 0.0 {
        return Err(Error::ZeroShoulderSeparation);
    }
    let rows: Vec<[Option<f64>; FEATURE_COUNT]> = seq
        .frames
        .iter()
        .map(|f| raw_features(&f.pose, routine_sep_max, confidence_floor))
        .collect();
    let mut angles = vec![[0.0; FEATURE_COUNT]; seq.len()];
    for feature in Feature::ALL {
        let col = feature.column();
        let mut values: Vec<Option<f64>> = rows.iter().map(|r| r[col]).collect();
        if matches!(
            feature,
            Feature::RightLeg | Feature::LeftLeg | Feature::Torso
        ) {
            let present: Vec<f64> = values.iter().flatten().copied().collect();
            let mut unwrapped = unwrap(&present).into_iter();
            for v in values.iter_mut().filter(|v| v.is_some()) {
                *v = unwrapped.next();
            }
        }
        let filled = fill_gaps(&values).ok_or(Error::MissingFeature(feature.name()))?;
        for (row, v) in angles.iter_mut().zip(filled) {
            row[col] = v;
        }
    }
    Ok(FeatureTrajectory {
        skill_ref: None,
        fps: seq.fps,
        angles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{PoseFrame, JOINT_COUNT};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn joint_angle_cases() {
        assert!(close(
            joint_angle((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)).unwrap(),
            180.0,
            1e-12
        ));
        assert!(close(
            joint_angle((0.0, 0.0), (0.0, 1.0), (1.0, 1.0)).unwrap(),
            90.0,
            1e-12
        ));
        assert!(joint_angle((1.0, 1.0), (1.0, 1.0), (2.0, 0.0)).is_err());
    }

    fn pose_with(pairs: &[(Joint, (f64, f64))]) -> Pose2D {
        let mut joints = [Keypoint::new(0.0, 0.0, 1.0); JOINT_COUNT];
        for &(j, (x, y)) in pairs {
            joints[j as usize] = Keypoint::new(x, y, 1.0);
        }
        Pose2D { joints }
    }

    #[test]
    fn torso_axis_convention() {
        let up = pose_with(&[(Joint::Pelvis, (0.0, 0.0)), (Joint::Thorax, (0.0, -10.0))]);
        assert!(close(torso_angle(&up), 0.0, 1e-12));
        let down = pose_with(&[(Joint::Pelvis, (0.0, 0.0)), (Joint::Thorax, (0.0, 10.0))]);
        assert!(close(torso_angle(&down).abs(), 180.0, 1e-12));
        let right = pose_with(&[(Joint::Pelvis, (0.0, 0.0)), (Joint::Thorax, (10.0, 0.0))]);
        assert!(close(torso_angle(&right), 90.0, 1e-12));
    }

    #[test]
    fn leg_axis_convention() {
        let below = pose_with(&[
            (Joint::RightHip, (5.0, 5.0)),
            (Joint::RightAnkle, (5.0, 50.0)),
        ]);
        assert!(close(leg_angle(&below, Side::Right), 0.0, 1e-12));
        // Clockwise from image-down points to image-left.
        let right = pose_with(&[
            (Joint::LeftHip, (5.0, 5.0)),
            (Joint::LeftAnkle, (40.0, 5.0)),
        ]);
        assert!(close(leg_angle(&right, Side::Left), -90.0, 1e-12));
        let left = pose_with(&[
            (Joint::LeftHip, (5.0, 5.0)),
            (Joint::LeftAnkle, (-40.0, 5.0)),
        ]);
        assert!(close(leg_angle(&left, Side::Left), 90.0, 1e-12));
    }

    #[test]
    fn unwrap_cases() {
        assert_eq!(unwrap(&[170.0, -170.0]), vec![170.0, 190.0]);
        let smooth = [0.0, 10.0, 25.0, 20.0, -30.0];
        assert_eq!(unwrap(&smooth), smooth.to_vec());
        // A full clockwise turn sampled at 20 points, wrapped into (-180, 180].
        let ramp: Vec<f64> = (0..20)
            .map(|i| {
                let a: f64 = 10.0 + 360.0 * i as f64 / 19.0;
                (a + 180.0).rem_euclid(360.0) - 180.0
            })
            .collect();
        let u = unwrap(&ramp);
        assert!(close(u[19], u[0] + 360.0, 1e-9), "{u:?}");
        for (a, b) in u.iter().zip(&ramp) {
            assert!(close(
                (a - b)
                    .rem_euclid(360.0)
                    .min(360.0 - (a - b).rem_euclid(360.0)),
                0.0,
                1e-9
            ));
        }
    }

    fn shoulders(r: (f64, f64), l: (f64, f64)) -> Pose2D {
        pose_with(&[(Joint::RightShoulder, r), (Joint::LeftShoulder, l)])
    }

    #[test]
    fn twist_anchors() {
        assert!(close(
            twist_angle(&shoulders((20.0, 0.0), (0.0, 0.0)), 20.0),
            0.0,
            1e-12
        ));
        assert!(close(
            twist_angle(&shoulders((3.0, 7.0), (3.0, 7.0)), 20.0),
            90.0,
            1e-12
        ));
        assert!(close(
            twist_angle(&shoulders((0.0, 0.0), (20.0, 0.0)), 20.0),
            180.0,
            1e-12
        ));
        let seq = PoseSequence::new(
            vec![
                PoseFrame {
                    index: 0,
                    pose: shoulders((0.0, 0.0), (0.0, 0.0)),
                    origin: None,
                },
                PoseFrame {
                    index: 1,
                    pose: shoulders((0.0, 0.0), (0.0, 0.0)),
                    origin: None,
                },
            ],
            30.0,
        );
        assert!(matches!(
            twist_trajectory(&seq),
            Err(Error::ZeroShoulderSeparation)
        ));
    }

    /// Upright straight body, arms hanging along the torso.
    fn straight_pose() -> Pose2D {
        use Joint::*;
        pose_with(&[
            (HeadTop, (0.0, -100.0)),
            (UpperNeck, (0.0, -80.0)),
            (Thorax, (0.0, -70.0)),
            (RightShoulder, (3.0, -70.0)),
            (LeftShoulder, (-3.0, -70.0)),
            (RightElbow, (3.0, -40.0)),
            (LeftElbow, (-3.0, -40.0)),
            (RightWrist, (3.0, -15.0)),
            (LeftWrist, (-3.0, -15.0)),
            (Pelvis, (0.0, 0.0)),
            (RightHip, (3.0, 0.0)),
            (LeftHip, (-3.0, 0.0)),
            (RightKnee, (3.0, 45.0)),
            (LeftKnee, (-3.0, 45.0)),
            (RightAnkle, (3.0, 90.0)),
            (LeftAnkle, (-3.0, 90.0)),
        ])
    }

    #[test]
    fn straight_posture_features() {
        let frames = (0..5)
            .map(|i| PoseFrame {
                index: i,
                pose: straight_pose(),
                origin: None,
            })
            .collect();
        let seq = PoseSequence::new(frames, 30.0);
        let ft = extract_features(&seq, 6.0).unwrap();
        for row in &ft.angles {
            for c in [0, 1, 4, 5, 6, 7] {
                assert!(close(row[c], 180.0, 1e-9), "col {c}: {}", row[c]);
            }
            for c in [2, 3, 8, 9, 10] {
                assert!(close(row[c], 0.0, 1e-9), "col {c}: {}", row[c]);
            }
            // Right shoulder on the image-right at full separation.
            assert!(close(row[11], 0.0, 1e-9));
        }
    }

    #[test]
    fn missing_joint_is_interpolated_in_angle_space() {
        let mut frames: Vec<PoseFrame> = (0..3)
            .map(|i| PoseFrame {
                index: i,
                pose: straight_pose(),
                origin: None,
            })
            .collect();
        // Bend the right knee to 90 degrees in the last frame.
        frames[2].pose.joint_mut(Joint::RightAnkle).x = 48.0;
        frames[2].pose.joint_mut(Joint::RightAnkle).y = 45.0;
        frames[1].pose.joint_mut(Joint::RightKnee).confidence = 0.0;
        let ft = extract_features(&PoseSequence::new(frames, 30.0), 6.0).unwrap();
        assert!(close(ft.angles[2][6], 90.0, 1e-9));
        assert!(close(ft.angles[1][6], 135.0, 1e-9));
    }

    #[test]
    fn errors() {
        let one = PoseSequence::new(
            vec![PoseFrame {
                index: 0,
                pose: straight_pose(),
                origin: None,
            }],
            30.0,
        );
        assert!(matches!(
            extract_features(&one, 6.0),
            Err(Error::TrajectoryTooShort(1))
        ));
        let mut frames: Vec<PoseFrame> = (0..3)
            .map(|i| PoseFrame {
                index: i,
                pose: straight_pose(),
                origin: None,
            })
            .collect();
        for f in &mut frames {
            f.pose.joint_mut(Joint::Thorax).confidence = 0.0;
        }
        assert!(matches!(
            extract_features(&PoseSequence::new(frames, 30.0), 6.0),
            Err(Error::MissingFeature("torso"))
        ));
    }
}
