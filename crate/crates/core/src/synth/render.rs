//! Flat-shaded debug rasteriser: a brick wall, a blue bed sheet at the
//! line row and the stick body drawn as capsules.

use crate::error::{Error, Result};
use crate::frame_io::{FrameSource, StreamInfo};
use crate::pose::{Pose2D, PoseSequence};
use crate::raster::Frame;

use super::body::SEGMENTS;
use super::Stage;

pub const BODY_RGB: [u8; 3] = [235, 200, 160];
pub const BED_RGB: [u8; 3] = [40, 70, 200];
const FLOOR_RGB: [u8; 3] = [55, 50, 45];
const MORTAR_RGB: [u8; 3] = [120, 115, 105];
const BED_THICKNESS: usize = 12;

fn brick_shade(bx: usize, by: usize) -> i32 {
    let h = (bx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (by as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    ((h >> 33) % 25) as i32 - 12
}

/// The empty scene for a stage.
pub fn scene(stage: &Stage) -> Frame {
    let (w, h) = (stage.width, stage.height);
    let mut f = Frame::filled(w, h, 0, FLOOR_RGB);
    let (bw, bh) = (36usize, 16usize);
    for y in 0..stage.line_row.min(h) {
        let row = y / bh;
        let offset = if row % 2 == 0 { 0 } else { bw / 2 };
        for x in 0..w {
            let col = (x + offset) / bw;
            let mortar = y % bh < 2 || (x + offset) % bw < 2;
            let rgb = if mortar {
                MORTAR_RGB
            } else {
                let s = brick_shade(col, row);
                [(150 + s) as u8, (85 + s) as u8, (60 + s / 2) as u8]
            };
            f.set(x, y, rgb);
        }
    }
    for y in stage.line_row..(stage.line_row + BED_THICKNESS).min(h) {
        for x in 0..w {
            f.set(x, y, BED_RGB);
        }
    }
    f
}

/// Fills every pixel within `r` of the segment `a`-`b`.
fn capsule(frame: &mut Frame, a: (f64, f64), b: (f64, f64), r: f64, rgb: [u8; 3]) {
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    let x0 = (a.0.min(b.0) - r).floor().max(0.0);
    let x1 = (a.0.max(b.0) + r).ceil().min(w - 1.0);
    let y0 = (a.1.min(b.1) - r).floor().max(0.0);
    let y1 = (a.1.max(b.1) + r).ceil().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let r2 = r * r;
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 {
                ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (ex, ey) = (px - t * dx, py - t * dy);
            if ex * ex + ey * ey <= r2 {
                frame.set(x, y, rgb);
            }
        }
    }
}

pub fn draw_body(frame: &mut Frame, pose: &Pose2D, body_height: f64) {
    for &(a, b, radius) in SEGMENTS.iter() {
        let (ka, kb) = (pose.joint(a), pose.joint(b));
        capsule(
            frame,
            (ka.x, ka.y),
            (kb.x, kb.y),
            radius * body_height,
            BODY_RGB,
        );
    }
}

pub fn render_pose(scene: &Frame, pose: &Pose2D, stage: &Stage, index: usize) -> Frame {
    let mut f = scene.clone();
    f.index = index;
    draw_body(&mut f, pose, stage.body_height);
    f
}

/// Renders every frame of a full-frame pose sequence.
pub fn render_sequence<'a>(
    poses: &'a PoseSequence,
    stage: &'a Stage,
) -> impl Iterator<Item = Frame> + 'a {
    let bg = scene(stage);
    poses
        .frames
        .iter()
        .map(move |pf| render_pose(&bg, &pf.pose, stage, pf.index))
}

/// Frames rendered on demand from a full-frame pose sequence, optionally
/// preceded by `lead_in` frames of the empty stage.
#[derive(Debug, Clone)]
pub struct RenderedSource {
    poses: PoseSequence,
    stage: Stage,
    scene: Frame,
    lead_in: usize,
}

impl RenderedSource {
    pub fn new(poses: PoseSequence, stage: Stage) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::NoFrames("<rendered>".into()));
        }
        let scene = scene(&stage);
        Ok(RenderedSource {
            poses,
            stage,
            scene,
            lead_in: 0,
        })
    }

    pub fn with_lead_in(mut self, frames: usize) -> Self {
        self.lead_in = frames;
        self
    }

    pub fn lead_in(&self) -> usize {
        self.lead_in
    }
}

impl FrameSource for RenderedSource {
    fn info(&self) -> StreamInfo {
        StreamInfo {
            width: self.stage.width,
            height: self.stage.height,
            fps: self.poses.fps,
            frame_count: self.lead_in + self.poses.len(),
        }
    }

    fn read(&mut self, index: usize) -> Result<Frame> {
        if index < self.lead_in {
            let mut f = self.scene.clone();
            f.index = index;
            return Ok(f);
        }
        let pf = self.poses.frames.get(index - self.lead_in).ok_or_else(|| {
            Error::InvalidFrame(format!(
                "frame {index} out of range (have {})",
                self.poses.len()
            ))
        })?;
        Ok(render_pose(&self.scene, &pf.pose, &self.stage, index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::detect_trampoline;
    use crate::synth::body::{image_joints, place, BodyState};
    use crate::synth::{position_posture, Stage};

    #[test]
    fn scene_has_detectable_bed() {
        let stage = Stage::default();
        let s = scene(&stage);
        assert_eq!((s.width(), s.height()), (896, 504));
        let line = detect_trampoline(&s, 170.0, 260.0, 0.25, 0.3).unwrap();
        assert_eq!(line.top_row, 440);
    }

    #[test]
    fn body_pixels_are_drawn_in_body_colour() {
        let stage = Stage::default();
        let state = BodyState {
            posture: position_posture(crate::catalog::Position::Feet),
            somersault: 0.0,
            twist: 0.0,
        };
        let pose = place(&image_joints(&state, stage.body_height), (448.0, 250.0));
        let f = render_pose(&scene(&stage), &pose, &stage, 7);
        assert_eq!(f.index, 7);
        let p = pose.joint(crate::pose::Joint::Pelvis);
        assert_eq!(f.get(p.x.round() as usize, p.y.round() as usize), BODY_RGB);
        assert_ne!(f.get(10, 10), BODY_RGB);
    }
}
