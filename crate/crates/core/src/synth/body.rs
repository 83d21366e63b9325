//! Articulated stick body seen from the side.
//!
//! Joints are placed in a body frame with axes `u` (along the trunk, towards
//! the head), `v` (the direction the chest faces) and `w` (towards the
//! body's right). Twist turns `v`/`w` about `u`; the depth component is then
//! dropped and the `u`/`v` plane is rotated onto the image by the torso
//! angle. Lengths are fractions of standing height.

use serde::{Deserialize, Serialize};

use crate::pose::{Joint, Keypoint, Pose2D, JOINT_COUNT};

pub const TRUNK: f64 = 0.288;
pub const NECK: f64 = 0.052;
pub const HEAD: f64 = 0.130;
pub const SHOULDER_HALF_WIDTH: f64 = 0.110;
pub const HIP_HALF_WIDTH: f64 = 0.055;
pub const UPPER_ARM: f64 = 0.186;
pub const FOREARM: f64 = 0.146;
pub const THIGH: f64 = 0.245;
pub const SHANK: f64 = 0.246;

/// Internal joint angles in degrees, shared by both sides of the body.
///
/// `shoulder`, `elbow`, `hip` and `knee` are the interior angles the feature
/// extractor measures on an untwisted body. `straddle` spreads the legs
/// sideways before they flex; `lean` tilts the trunk backwards (positive)
/// or forwards in the body's own frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posture {
    pub shoulder: f64,
    pub elbow: f64,
    pub hip: f64,
    pub knee: f64,
    #[serde(default)]
    pub straddle: f64,
    #[serde(default)]
    pub lean: f64,
}

impl Posture {
    pub const fn new(
        shoulder: f64,
        elbow: f64,
        hip: f64,
        knee: f64,
        straddle: f64,
        lean: f64,
    ) -> Self {
        Posture {
            shoulder,
            elbow,
            hip,
            knee,
            straddle,
            lean,
        }
    }

    pub fn lerp(&self, other: &Posture, s: f64) -> Posture {
        let l = |a: f64, b: f64| a + (b - a) * s;
        Posture {
            shoulder: l(self.shoulder, other.shoulder),
            elbow: l(self.elbow, other.elbow),
            hip: l(self.hip, other.hip),
            knee: l(self.knee, other.knee),
            straddle: l(self.straddle, other.straddle),
            lean: l(self.lean, other.lean),
        }
    }

    /// Adds `f()` to every field, then clamps joints to anatomical ranges.
    pub fn perturbed(&self, mut f: impl FnMut() -> f64) -> Posture {
        let joint = |v: f64| v.clamp(5.0, 180.0);
        Posture {
            shoulder: joint(self.shoulder + f()),
            elbow: joint(self.elbow + f()),
            hip: joint(self.hip + f()),
            knee: joint(self.knee + f()),
            straddle: (self.straddle + f()).clamp(0.0, 80.0),
            lean: self.lean + f(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let joints = [self.shoulder, self.elbow, self.hip, self.knee];
        joints.iter().all(|v| (0.0..=180.0).contains(v))
            && (0.0..=90.0).contains(&self.straddle)
            && self.lean.is_finite()
    }
}

/// Orientation and shape of the body at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub posture: Posture,
    /// Image-plane rotation of the trunk in degrees, clockwise from upright,
    /// before the posture's lean is applied.
    pub somersault: f64,
    /// Rotation about the trunk axis in degrees; 0 faces image-left.
    pub twist: f64,
}

impl BodyState {
    /// Image rotation of the trunk. Lean happens in the body's sagittal
    /// plane, so its visible share shrinks and flips as the body twists.
    pub fn torso_angle(&self) -> f64 {
        self.somersault + self.posture.lean * self.twist.to_radians().cos()
    }
}

type V3 = [f64; 3];

fn add(a: V3, b: V3, s: f64) -> V3 {
    [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s]
}

/// Unit vector in the `u`/`v` plane turned `deg` from `-u` towards `+v`,
/// then spread sideways by `spread` degrees towards `side * w`.
fn limb_dir(deg: f64, spread: f64, side: f64) -> V3 {
    let (s, c) = deg.to_radians().sin_cos();
    let (ss, sc) = spread.to_radians().sin_cos();
    [-sc * c, sc * s, side * ss]
}

/// Joint positions in body coordinates (pelvis at the origin).
pub fn body_joints(posture: &Posture) -> [V3; JOINT_COUNT] {
    use Joint::*;
    let p = posture;
    let mut j = [[0.0; 3]; JOINT_COUNT];
    j[Pelvis as usize] = [0.0, 0.0, 0.0];
    j[Thorax as usize] = [TRUNK, 0.0, 0.0];
    j[UpperNeck as usize] = [TRUNK + NECK, 0.0, 0.0];
    j[HeadTop as usize] = [TRUNK + NECK + HEAD, 0.0, 0.0];
    for (side, shoulder, elbow, wrist, hip, knee, ankle) in [
        (
            1.0,
            RightShoulder,
            RightElbow,
            RightWrist,
            RightHip,
            RightKnee,
            RightAnkle,
        ),
        (
            -1.0,
            LeftShoulder,
            LeftElbow,
            LeftWrist,
            LeftHip,
            LeftKnee,
            LeftAnkle,
        ),
    ] {
        let sh = [TRUNK, 0.0, side * SHOULDER_HALF_WIDTH];
        let el = add(sh, limb_dir(p.shoulder, 0.0, side), UPPER_ARM);
        let wr = add(
            el,
            limb_dir(p.shoulder + 180.0 - p.elbow, 0.0, side),
            FOREARM,
        );
        let hp = [0.0, 0.0, side * HIP_HALF_WIDTH];
        let flex = 180.0 - p.hip;
        let kn = add(hp, limb_dir(flex, p.straddle, side), THIGH);
        let an = add(
            kn,
            limb_dir(flex - (180.0 - p.knee), p.straddle, side),
            SHANK,
        );
        j[shoulder as usize] = sh;
        j[elbow as usize] = el;
        j[wrist as usize] = wr;
        j[hip as usize] = hp;
        j[knee as usize] = kn;
        j[ankle as usize] = an;
    }
    j
}

/// Image offsets of every joint from the pelvis for a body `height` pixels
/// tall.
pub fn image_joints(state: &BodyState, height: f64) -> [(f64, f64); JOINT_COUNT] {
    let (st, ct) = state.torso_angle().to_radians().sin_cos();
    let (sp, cp) = state.twist.to_radians().sin_cos();
    let up = (st, -ct);
    let fwd = (-ct, -st);
    body_joints(&state.posture).map(|[u, v, w]| {
        let v_seen = v * cp - w * sp;
        (
            height * (up.0 * u + fwd.0 * v_seen),
            height * (up.1 * u + fwd.1 * v_seen),
        )
    })
}

/// Segments used for the body centroid and for drawing, with the radius
/// of each drawn limb as a fraction of height.
pub const SEGMENTS: [(Joint, Joint, f64); 15] = {
    use Joint::*;
    [
        (Pelvis, Thorax, 0.070),
        (Thorax, UpperNeck, 0.030),
        (UpperNeck, HeadTop, 0.055),
        (RightShoulder, LeftShoulder, 0.045),
        (RightHip, LeftHip, 0.050),
        (RightShoulder, RightElbow, 0.030),
        (RightElbow, RightWrist, 0.025),
        (LeftShoulder, LeftElbow, 0.030),
        (LeftElbow, LeftWrist, 0.025),
        (RightHip, RightKnee, 0.050),
        (RightKnee, RightAnkle, 0.035),
        (LeftHip, LeftKnee, 0.050),
        (LeftKnee, LeftAnkle, 0.035),
        (Thorax, RightShoulder, 0.040),
        (Thorax, LeftShoulder, 0.040),
    ]
};

fn segment_lengths() -> [f64; SEGMENTS.len()] {
    let j = body_joints(&Posture::new(0.0, 180.0, 180.0, 180.0, 0.0, 0.0));
    SEGMENTS.map(|(a, b, _)| {
        let (p, q) = (j[a as usize], j[b as usize]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    })
}

/// Centroid as the length-weighted mean of segment midpoints. Segment
/// lengths are fixed in the body, so this is the projection of the body's
/// own centroid.
pub fn body_centroid(joints: &[(f64, f64); JOINT_COUNT]) -> (f64, f64) {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for (&(a, b, _), w) in SEGMENTS.iter().zip(segment_lengths()) {
        let (p, q) = (joints[a as usize], joints[b as usize]);
        sx += w * (p.0 + q.0) / 2.0;
        sy += w * (p.1 + q.1) / 2.0;
        sw += w;
    }
    (sx / sw, sy / sw)
}

/// Places the body so its centroid sits at `centroid`.
pub fn place(offsets: &[(f64, f64); JOINT_COUNT], centroid: (f64, f64)) -> Pose2D {
    let c = body_centroid(offsets);
    Pose2D {
        joints: offsets
            .map(|(x, y)| Keypoint::new(centroid.0 + x - c.0, centroid.1 + y - c.1, 1.0)),
    }
}

/// Distance from the centroid down to the lowest joint, in pixels.
pub fn clearance(offsets: &[(f64, f64); JOINT_COUNT]) -> f64 {
    let c = body_centroid(offsets);
    offsets
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        - c.1
}
