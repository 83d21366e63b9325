//! Parametric motion generator for named skills.
//!
//! A skill is a flight between two contact phases. Shape is a list of
//! posture keyframes over the flight, somersault a torso rotation program
//! and twist a rotation about the trunk axis. The body centroid follows a
//! ballistic arc between the contact heights of the take-off and landing
//! states; during contact the bed sinks along a half sine. Phase lengths
//! are whole frames, so the flight of a skill generated at 60 fps contains
//! every sample of the same skill generated at 30 fps.

pub mod body;
pub mod render;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    classified_skills, parse_code, Position, Rotation, Shape, SkillCode, SkillRecord,
};
use crate::error::{Error, Result};
use crate::evaluation::LabelledExample;
use crate::features::{extract_features_with, FeatureTrajectory};
use crate::pose::{Keypoint, PoseFrame, PoseSequence, JOINT_COUNT};
use crate::raster::Point;
use crate::rng::SeededStream;
use crate::segmentation::CentroidTrack;

pub use body::{BodyState, Posture};

const GRAVITY: f64 = 9.81;

/// Camera and scene geometry shared by the generator and the rasteriser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage {
    pub width: usize,
    pub height: usize,
    /// Image row of the top of the bed.
    pub line_row: usize,
    /// Standing height of the athlete in pixels.
    pub body_height: f64,
    pub px_per_metre: f64,
    /// Deepest bed depression during contact, in pixels.
    pub depression: f64,
    pub centre_x: f64,
}

impl Default for Stage {
    fn default() -> Self {
        Stage {
            width: 896,
            height: 504,
            line_row: 440,
            body_height: 120.0,
            px_per_metre: 70.0,
            depression: 30.0,
            centre_x: 448.0,
        }
    }
}

impl Stage {
    /// Scales the default scene to a frame `width` pixels wide.
    pub fn scaled(width: usize) -> Stage {
        let d = Stage::default();
        let k = width as f64 / d.width as f64;
        Stage {
            width,
            height: (d.height as f64 * k).round() as usize,
            line_row: (d.line_row as f64 * k).round() as usize,
            body_height: d.body_height * k,
            px_per_metre: d.px_per_metre * k,
            depression: d.depression * k,
            centre_x: width as f64 / 2.0,
        }
    }

    /// Shoulder separation of a body facing the camera.
    pub fn shoulder_span(&self) -> f64 {
        2.0 * body::SHOULDER_HALF_WIDTH * self.body_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    /// Fraction of the flight, in (0, 1).
    pub at: f64,
    pub posture: Posture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillMotionModel {
    pub code: SkillCode,
    /// Seconds from take-off to landing.
    pub flight_time: f64,
    /// Seconds on the bed before take-off.
    pub contact_time: f64,
    pub takeoff: Position,
    pub landing: Position,
    /// Interior postures; the take-off and landing postures come from the
    /// positions.
    pub keyframes: Vec<Keyframe>,
    /// Rotation about the lateral axis in degrees, backwards positive.
    pub somersault: f64,
    /// Rotation about the trunk axis in degrees.
    pub twist: f64,
    /// Fractions of the flight over which the twist happens.
    pub twist_window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Per-frame keypoint jitter, pixels.
    pub keypoint_sigma: f64,
    /// Jitter of every program target, degrees.
    pub angle_sigma: f64,
    /// Jitter of phase lengths and keyframe times, frames.
    pub timing_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let sig = [self.keypoint_sigma, self.angle_sigma, self.timing_sigma];
        if sig.iter().all(|s| s.is_finite() && *s >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "noise sigmas must be finite and non-negative".into(),
            ))
        }
    }
}

pub fn position_posture(position: Position) -> Posture {
    match position {
        Position::Feet => Posture::new(170.0, 175.0, 180.0, 180.0, 0.0, 0.0),
        Position::Seat => Posture::new(25.0, 175.0, 100.0, 180.0, 0.0, 10.0),
        Position::Back => Posture::new(90.0, 175.0, 125.0, 170.0, 0.0, 0.0),
        Position::Front => Posture::new(100.0, 90.0, 175.0, 180.0, 0.0, 0.0),
    }
}

/// Trunk rotation of a position for a body facing image-left.
pub fn position_orientation(position: Position) -> f64 {
    match position {
        Position::Feet | Position::Seat => 0.0,
        Position::Back => 90.0,
        Position::Front => -90.0,
    }
}

pub fn shape_posture(shape: Shape) -> Posture {
    match shape {
        Shape::Tuck => Posture::new(45.0, 90.0, 55.0, 40.0, 0.0, -10.0),
        Shape::Pike => Posture::new(80.0, 175.0, 50.0, 180.0, 0.0, -30.0),
        Shape::Straddle => Posture::new(95.0, 175.0, 70.0, 180.0, 40.0, -25.0),
        Shape::Straight => Posture::new(15.0, 175.0, 180.0, 180.0, 0.0, 0.0),
    }
}

/// Arms pulled in while twisting without a named shape.
const TWIST_POSTURE: Posture = Posture::new(10.0, 70.0, 180.0, 180.0, 0.0, 0.0);

pub const SKILL_FLIGHT_TIME: f64 = 1.6;
pub const BOUNCE_FLIGHT_TIME: f64 = 0.7;
pub const CONTACT_TIME: f64 = 0.3;

fn signed_somersault(record: &SkillRecord) -> f64 {
    let q = f64::from(record.somersault_quarters) * 90.0;
    match record.somersault_direction {
        Some(Rotation::Backward) => q,
        Some(Rotation::Forward) => -q,
        None => 0.0,
    }
}

fn wrap(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

impl SkillMotionModel {
    /// A model built from a catalog row's positions, shape and rotations.
    pub fn for_record(record: &SkillRecord) -> Self {
        let somersault = signed_somersault(record);
        let twist = f64::from(record.twist_halves) * 180.0;
        let rotating = record.somersault_quarters >= 2;
        let hold = |p: Posture, from: f64, to: f64| {
            vec![
                Keyframe {
                    at: from,
                    posture: p,
                },
                Keyframe { at: to, posture: p },
            ]
        };
        let keyframes = match record.shape {
            Some(s) if rotating => hold(shape_posture(s), 0.2, 0.7),
            Some(s) => hold(shape_posture(s), 0.35, 0.6),
            None if twist > 0.0 && !rotating => hold(TWIST_POSTURE, 0.25, 0.75),
            None => Vec::new(),
        };
        let twist_window = if rotating { (0.45, 0.9) } else { (0.15, 0.85) };
        SkillMotionModel {
            code: record.code,
            flight_time: SKILL_FLIGHT_TIME,
            contact_time: CONTACT_TIME,
            takeoff: record.takeoff,
            landing: record.landing,
            keyframes,
            somersault,
            twist,
            twist_window,
        }
    }

    /// A straight bounce with its own flight time, for in- and out-bounces.
    pub fn bounce(flight_time: f64) -> Self {
        let f0f = parse_code("F0F").expect("F0F is in the catalog");
        SkillMotionModel {
            flight_time,
            ..SkillMotionModel::for_record(f0f.record())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(format!("{}: {m}", self.code)));
        if !(self.flight_time > 0.0 && self.flight_time.is_finite()) {
            return bad("flight time must be positive".into());
        }
        if !(self.contact_time > 0.0 && self.contact_time.is_finite()) {
            return bad("contact time must be positive".into());
        }
        let mut last = 0.0;
        for k in &self.keyframes {
            if !(k.at > 0.0 && k.at < 1.0 && k.at >= last) {
                return bad("keyframes must be ordered inside (0, 1)".into());
            }
            if !k.posture.is_valid() {
                return bad(format!("keyframe at {} has an out-of-range angle", k.at));
            }
            last = k.at;
        }
        let (a, b) = self.twist_window;
        if !(0.0..1.0).contains(&a) || !(a < b && b <= 1.0) {
            return bad("twist window must satisfy 0 <= start < end <= 1".into());
        }
        if (self.twist / 180.0).fract() != 0.0 {
            return bad("twist must be a whole number of half turns".into());
        }
        let facing = if (self.twist / 180.0) as i64 % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let end = position_orientation(self.takeoff) + self.somersault;
        if wrap(end - facing * position_orientation(self.landing)).abs() > 1e-9 {
            return bad("somersault does not carry the take-off position into the landing".into());
        }
        let r = self.code.record();
        if (r.takeoff, r.landing) != (self.takeoff, self.landing) {
            return bad("positions disagree with the catalog".into());
        }
        Ok(())
    }
}

/// One model per classified catalog skill, in catalog order.
pub fn builtin_models() -> Vec<SkillMotionModel> {
    classified_skills()
        .map(SkillMotionModel::for_record)
        .collect()
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// A model with its noise drawn: whole-frame phases and concrete targets.
#[derive(Debug, Clone)]
struct Realised {
    flight_frames: usize,
    contact_frames: usize,
    /// Includes the take-off (0) and landing (1) postures.
    keyframes: Vec<(f64, Posture)>,
    somersault: f64,
    twist: f64,
    twist_window: (f64, f64),
}

fn realise(
    model: &SkillMotionModel,
    fps: f64,
    noise: &NoiseSpec,
    rng: &mut SeededStream,
    takeoff: Option<Posture>,
) -> Realised {
    let flight = (model.flight_time * fps + rng.gaussian(noise.timing_sigma)).round();
    let flight_frames = (flight as usize).max(4);
    // Even, so mid-contact falls on a frame.
    let half = (model.contact_time * fps / 2.0 + rng.gaussian(noise.timing_sigma) / 2.0).round();
    let contact_frames = 2 * (half as usize).max(1);
    let shift = noise.timing_sigma / flight_frames as f64;
    let mut jitter = || rng.gaussian(noise.angle_sigma);
    let start = takeoff.unwrap_or_else(|| position_posture(model.takeoff).perturbed(&mut jitter));
    let mut keyframes = vec![(0.0, start)];
    let mut interior: Vec<(f64, Posture)> = model
        .keyframes
        .iter()
        .map(|k| (k.at, k.posture.perturbed(&mut jitter)))
        .collect();
    let landing = position_posture(model.landing).perturbed(&mut jitter);
    let somersault = model.somersault
        + if model.somersault != 0.0 {
            jitter()
        } else {
            0.0
        };
    let twist = model.twist + if model.twist != 0.0 { jitter() } else { 0.0 };
    for k in &mut interior {
        k.0 = (k.0 + rng.gaussian(shift)).clamp(0.02, 0.98);
    }
    interior.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyframes.extend(interior);
    keyframes.push((1.0, landing));
    Realised {
        flight_frames,
        contact_frames,
        keyframes,
        somersault,
        twist,
        twist_window: model.twist_window,
    }
}

impl Realised {
    fn posture_at(&self, p: f64) -> Posture {
        let k = &self.keyframes;
        let i = k
            .iter()
            .rposition(|(at, _)| *at <= p)
            .unwrap_or(0)
            .min(k.len() - 2);
        let (a, b) = (k[i], k[i + 1]);
        let span = b.0 - a.0;
        let s = if span > 0.0 {
            smoothstep((p - a.0) / span)
        } else {
            1.0
        };
        a.1.lerp(&b.1, s)
    }

    fn state_at(&self, start: &BodyState, facing: f64, p: f64) -> BodyState {
        let (a, b) = self.twist_window;
        BodyState {
            posture: self.posture_at(p),
            somersault: start.somersault + facing * self.somersault * smoothstep(p),
            twist: start.twist + self.twist * smoothstep((p - a) / (b - a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillSample {
    pub poses: PoseSequence,
    pub track: CentroidTrack,
    /// Frames where the body touches the bed.
    pub contact: Vec<bool>,
    /// Take-off and landing frames; the flight lies strictly between them.
    pub flight: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub start: usize,
    pub end: usize,
    pub code: SkillCode,
    pub is_routine_jump: bool,
    pub flight: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutineSample {
    pub poses: PoseSequence,
    pub track: CentroidTrack,
    pub contact: Vec<bool>,
    pub segments: Vec<TruthSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutineSpec {
    pub skills: Vec<SkillCode>,
    pub in_bounces: usize,
    pub out_bounces: usize,
}

impl Default for RoutineSpec {
    fn default() -> Self {
        RoutineSpec {
            skills: Vec::new(),
            in_bounces: 3,
            out_bounces: 1,
        }
    }
}

/// Accumulates frames along the timeline.
struct Timeline<'a> {
    stage: &'a Stage,
    fps: f64,
    noise: NoiseSpec,
    frames: Vec<PoseFrame>,
    centroids: Vec<Option<Point>>,
    contact: Vec<bool>,
}

impl<'a> Timeline<'a> {
    fn new(stage: &'a Stage, fps: f64, noise: NoiseSpec) -> Self {
        Timeline {
            stage,
            fps,
            noise,
            frames: Vec::new(),
            centroids: Vec::new(),
            contact: Vec::new(),
        }
    }

    fn resting_y(&self, state: &BodyState) -> f64 {
        let offsets = body::image_joints(state, self.stage.body_height);
        self.stage.line_row as f64 - body::clearance(&offsets)
    }

    fn push(
        &mut self,
        state: &BodyState,
        centroid: (f64, f64),
        in_contact: bool,
        rng: &mut SeededStream,
    ) {
        let offsets = body::image_joints(state, self.stage.body_height);
        let mut pose = body::place(&offsets, centroid);
        let sigma = self.noise.keypoint_sigma;
        for k in pose.joints.iter_mut() {
            k.x += rng.gaussian(sigma);
            k.y += rng.gaussian(sigma);
        }
        let seen: [(f64, f64); JOINT_COUNT] = pose.joints.map(|k: Keypoint| (k.x, k.y));
        let c = body::body_centroid(&seen);
        self.centroids.push(Some(Point::new(c.0, c.1)));
        self.frames.push(PoseFrame {
            index: self.frames.len(),
            pose,
            origin: None,
        });
        self.contact.push(in_contact);
    }

    fn rest(&mut self, state: &BodyState, frames: usize, rng: &mut SeededStream) {
        let y = self.resting_y(state);
        for _ in 0..frames {
            self.push(state, (self.stage.centre_x, y), true, rng);
        }
    }

    /// Contact samples `j` in `range` of a contact lasting `n` frames.
    fn contact(
        &mut self,
        state: &BodyState,
        n: usize,
        range: std::ops::RangeInclusive<usize>,
        rng: &mut SeededStream,
    ) {
        let y = self.resting_y(state);
        for j in range {
            let sink = self.stage.depression * (std::f64::consts::PI * j as f64 / n as f64).sin();
            self.push(state, (self.stage.centre_x, y + sink), true, rng);
        }
    }

    /// Airborne frames strictly between take-off and landing. Returns the
    /// landing state.
    fn flight(&mut self, skill: &Realised, start: &BodyState, rng: &mut SeededStream) -> BodyState {
        let facing = if start.twist.to_radians().cos() >= 0.0 {
            1.0
        } else {
            -1.0
        };
        let end = skill.state_at(start, facing, 1.0);
        let (y0, y1) = (self.resting_y(start), self.resting_y(&end));
        let n = skill.flight_frames;
        let tf = n as f64 / self.fps;
        let lift = self.stage.px_per_metre * GRAVITY / 2.0;
        for k in 1..n {
            let p = k as f64 / n as f64;
            let t = p * tf;
            let y = y0 + (y1 - y0) * p - lift * t * (tf - t);
            let state = skill.state_at(start, facing, p);
            self.push(&state, (self.stage.centre_x, y), false, rng);
        }
        end
    }

    fn track(&self) -> CentroidTrack {
        CentroidTrack::new(self.centroids.clone(), self.fps)
            .with_trampoline_row(self.stage.line_row as f64)
    }

    fn poses(&self) -> PoseSequence {
        PoseSequence::new(self.frames.clone(), self.fps)
    }
}

fn start_state(position: Position, posture: Posture) -> BodyState {
    BodyState {
        posture,
        somersault: position_orientation(position),
        twist: 0.0,
    }
}

fn check_fps(fps: f64) -> Result<()> {
    if fps > 0.0 && fps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "fps must be positive, got {fps}"
        )))
    }
}

/// One skill from mid-contact before take-off to mid-contact after landing.
pub fn generate_skill(
    model: &SkillMotionModel,
    fps: f64,
    noise: &NoiseSpec,
    stage: &Stage,
) -> Result<SkillSample> {
    check_fps(fps)?;
    model.validate()?;
    noise.validate()?;
    let mut rng = SeededStream::new(noise.seed);
    let skill = realise(model, fps, noise, &mut rng, None);
    let start = start_state(model.takeoff, skill.keyframes[0].1);
    let mut tl = Timeline::new(stage, fps, *noise);
    let c = skill.contact_frames;
    tl.contact(&start, c, c / 2..=c, &mut rng);
    let takeoff = tl.frames.len() - 1;
    let end = tl.flight(&skill, &start, &mut rng);
    let landing = tl.frames.len();
    tl.contact(&end, c, 0..=c / 2, &mut rng);
    Ok(SkillSample {
        poses: tl.poses(),
        track: tl.track(),
        contact: tl.contact.clone(),
        flight: (takeoff, landing),
    })
}

const REST_FRAMES: usize = 15;

/// A routine of bounces separated by contacts, standing still at both
/// ends. Segment boundaries are the mid-contact frames.
pub fn generate_routine(
    spec: &RoutineSpec,
    fps: f64,
    noise: &NoiseSpec,
    stage: &Stage,
) -> Result<RoutineSample> {
    check_fps(fps)?;
    noise.validate()?;
    if spec.skills.is_empty() {
        return Err(Error::InvalidModel("routine has no skills".into()));
    }
    let bounce = SkillMotionModel::bounce(BOUNCE_FLIGHT_TIME);
    let mut plan: Vec<(SkillMotionModel, bool)> = Vec::new();
    plan.extend((0..spec.in_bounces).map(|_| (bounce.clone(), false)));
    plan.extend(
        spec.skills
            .iter()
            .map(|c| (SkillMotionModel::for_record(c.record()), true)),
    );
    plan.extend((0..spec.out_bounces).map(|_| (bounce.clone(), false)));
    for w in plan.windows(2) {
        if w[0].0.landing != w[1].0.takeoff {
            return Err(Error::InvalidModel(format!(
                "{} lands on {:?} but {} takes off from {:?}",
                w[0].0.code, w[0].0.landing, w[1].0.code, w[1].0.takeoff
            )));
        }
    }

    let mut rng = SeededStream::new(noise.seed);
    let mut tl = Timeline::new(stage, fps, *noise);
    let first = &plan[0].0;
    let mut state = start_state(first.takeoff, position_posture(first.takeoff));
    tl.rest(&state, REST_FRAMES, &mut rng);
    let mut mids = Vec::new();
    let mut flights = Vec::new();
    let mut contact_frames = 0;
    for (model, _) in &plan {
        model.validate()?;
        let skill = realise(model, fps, noise, &mut rng, Some(state.posture));
        contact_frames = skill.contact_frames;
        let c = contact_frames;
        mids.push(tl.frames.len() + c / 2);
        tl.contact(&state, c, 0..=c, &mut rng);
        let takeoff = tl.frames.len() - 1;
        let mut end = tl.flight(&skill, &state, &mut rng);
        flights.push((takeoff, tl.frames.len()));
        end.somersault = wrap(end.somersault);
        end.twist = end.twist.rem_euclid(360.0);
        state = end;
    }
    let c = contact_frames.max(2);
    mids.push(tl.frames.len() + c / 2);
    tl.contact(&state, c, 0..=c, &mut rng);
    tl.rest(&state, REST_FRAMES, &mut rng);

    let segments = plan
        .iter()
        .enumerate()
        .map(|(i, (model, routine))| TruthSegment {
            start: mids[i],
            end: mids[i + 1],
            code: model.code,
            is_routine_jump: *routine,
            flight: flights[i],
        })
        .collect();
    Ok(RoutineSample {
        poses: tl.poses(),
        track: tl.track(),
        contact: tl.contact.clone(),
        segments,
    })
}

/// Feature trajectory over a flight, take-off and landing frames included.
pub fn flight_features(
    poses: &PoseSequence,
    flight: (usize, usize),
    shoulder_span: f64,
) -> Result<FeatureTrajectory> {
    extract_features_with(&poses.slice_frames(flight.0, flight.1), shoulder_span, 0.0)
}

/// `per_skill` noisy examples of every model, with features computed over
/// each flight and twist normalised by the stage's shoulder span.
pub fn synthetic_dataset(
    models: &[SkillMotionModel],
    per_skill: usize,
    fps: f64,
    noise: &NoiseSpec,
    stage: &Stage,
) -> Result<Vec<LabelledExample>> {
    let mut seeds = SeededStream::new(noise.seed);
    let jobs: Vec<(&SkillMotionModel, u64)> = models
        .iter()
        .flat_map(|m| (0..per_skill).map(move |_| m))
        .map(|m| (m, seeds.next_u64()))
        .collect();
    jobs.par_iter()
        .map(|&(model, seed)| {
            let n = NoiseSpec { seed, ..*noise };
            let sample = generate_skill(model, fps, &n, stage)?;
            let mut trajectory =
                flight_features(&sample.poses, sample.flight, stage.shoulder_span())?;
            trajectory.skill_ref = Some(model.code.to_string());
            Ok(LabelledExample {
                code: model.code,
                trajectory,
            })
        })
        .collect()
}
