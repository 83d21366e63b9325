//! Checks shared by the oracle tests and the acceptance report. Each returns
//! a one-line measurement on success and a description of the first
//! violation otherwise.

#![allow(dead_code)]

use std::time::Instant;

use bounce_core::catalog::{load_catalog, lookup_tariff};
use bounce_core::classifier::{mse, resample};
use bounce_core::config::PipelineConfig;
use bounce_core::evaluation::{run_evaluation, EvalConfig, EvaluationReport};
use bounce_core::features::{
    extract_features, max_shoulder_separation, unwrap, Feature, FeatureTrajectory, FEATURE_COUNT,
};
use bounce_core::frame_io::{FrameSource, StreamInfo};
use bounce_core::parse_code;
use bounce_core::pipeline::{extract_routine, segment_track_file};
use bounce_core::pose::{Joint, Keypoint, Pose2D, PoseFrame, PoseSequence};
use bounce_core::raster::Frame;
use bounce_core::raster::{centroid, dilate, erode, BinaryMask};
use bounce_core::rng::SeededStream;
use bounce_core::synth::render::{render_sequence, RenderedSource};
use bounce_core::synth::{
    builtin_models, flight_features, generate_routine, generate_skill, synthetic_dataset,
    NoiseSpec, RoutineSpec, SkillMotionModel, Stage,
};

pub type Check = Result<String, String>;

fn random_mask(rng: &mut SeededStream, w: usize, h: usize) -> BinaryMask {
    let p = 0.2 + 0.6 * rng.unit();
    BinaryMask::from_fn(w, h, |_, _| rng.unit() < p)
}

/// One pass of a `k` x `k` window whose top-left corner is the output
/// pixel; pixels outside the image count as background.
fn naive_pass(m: &BinaryMask, k: usize, all: bool) -> BinaryMask {
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        let mut hits = 0;
        for dy in 0..k {
            for dx in 0..k {
                let (u, v) = (x + dx, y + dy);
                if u < m.width() && v < m.height() && m.get(u, v) {
                    hits += 1;
                }
            }
        }
        if all {
            hits == k * k
        } else {
            hits > 0
        }
    })
}

fn naive_morph(m: &BinaryMask, k: usize, n: usize, all: bool) -> BinaryMask {
    (0..n).fold(m.clone(), |acc, _| naive_pass(&acc, k, all))
}

pub fn morphology(masks: usize) -> Check {
    let mut rng = SeededStream::new(11);
    let mut cases = 0;
    for i in 0..masks {
        let m = random_mask(&mut rng, 32, 32);
        for k in 1..=5 {
            for n in 0..=3 {
                if erode(&m, k, k, n) != naive_morph(&m, k, n, true) {
                    return Err(format!(
                        "erosion differs on mask {i}, kernel {k}, {n} passes"
                    ));
                }
                if dilate(&m, k, k, n) != naive_morph(&m, k, n, false) {
                    return Err(format!(
                        "dilation differs on mask {i}, kernel {k}, {n} passes"
                    ));
                }
                cases += 2;
            }
        }
    }
    Ok(format!("{cases} cases over {masks} masks, exact"))
}

pub fn centroids(masks: usize) -> Check {
    let mut rng = SeededStream::new(12);
    let mut worst: f64 = 0.0;
    for i in 0..masks {
        let w = 8 + rng.below(56);
        let h = 8 + rng.below(56);
        let m = random_mask(&mut rng, w, h);
        let pts: Vec<(usize, usize)> = m.foreground().collect();
        if pts.is_empty() {
            continue;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let c = centroid(&m).map_err(|e| format!("mask {i}: {e}"))?;
        worst = worst.max((c.x - mx).abs()).max((c.y - my).abs());
    }
    if worst <= 1e-9 {
        Ok(format!("max deviation {worst:.1e} over {masks} masks"))
    } else {
        Err(format!("deviation {worst:.3e} exceeds 1e-9"))
    }
}

fn random_trajectory(rng: &mut SeededStream, len: usize) -> FeatureTrajectory {
    let rows = (0..len)
        .map(|_| std::array::from_fn(|_| rng.unit() * 720.0 - 360.0))
        .collect();
    FeatureTrajectory::new(rows, 30.0)
}

pub fn mse_oracle(pairs: usize) -> Check {
    let mut rng = SeededStream::new(13);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let t = 2 + rng.below(60);
        let a = random_trajectory(&mut rng, t);
        let b = random_trajectory(&mut rng, t);
        let mut sum = 0.0;
        for i in 0..t {
            for j in 0..FEATURE_COUNT {
                let d = a.angles[i][j] - b.angles[i][j];
                sum += d * d;
            }
        }
        let naive = sum / (t * FEATURE_COUNT) as f64;
        let got = mse(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - naive).abs() / naive.max(1.0));
        if mse(&a, &a).map_err(|e| e.to_string())? != 0.0 {
            return Err("mse of a trajectory with itself is not 0".into());
        }
        // integer angles keep the shifted copy exact
        let base =
            FeatureTrajectory::new(a.angles.iter().map(|r| r.map(f64::round)).collect(), 30.0);
        for delta in [0.5, -3.0, 12.25] {
            let shifted = FeatureTrajectory::new(
                base.angles.iter().map(|r| r.map(|v| v + delta)).collect(),
                30.0,
            );
            let got = mse(&shifted, &base).map_err(|e| e.to_string())?;
            if got != delta * delta {
                return Err(format!("offset {delta} gave {got}, not {}", delta * delta));
            }
        }
    }
    if worst <= 1e-9 {
        Ok(format!(
            "max relative deviation {worst:.1e} over {pairs} pairs"
        ))
    } else {
        Err(format!("deviation {worst:.3e} exceeds 1e-9"))
    }
}

pub fn resampling() -> Check {
    let column = |vals: &[f64]| {
        FeatureTrajectory::new(vals.iter().map(|&v| [v; FEATURE_COUNT]).collect(), 30.0)
    };
    let out = resample(&column(&[0.0, 90.0, 180.0]), 5).map_err(|e| e.to_string())?;
    let got: Vec<f64> = out.angles.iter().map(|r| r[0]).collect();
    if got != [0.0, 45.0, 90.0, 135.0, 180.0] {
        return Err(format!("[0, 90, 180] -> {got:?}"));
    }
    let mut rng = SeededStream::new(14);
    for _ in 0..200 {
        let len = 2 + rng.below(40);
        let t = random_trajectory(&mut rng, len);
        let target = 2 + rng.below(80);
        let r = resample(&t, target).map_err(|e| e.to_string())?;
        if r.angles.len() != target
            || r.angles[0] != t.angles[0]
            || r.angles[target - 1] != *t.angles.last().unwrap()
        {
            return Err(format!(
                "endpoints moved resampling {} -> {target}",
                t.len()
            ));
        }
    }
    Ok("[0,90,180] -> [0,45,90,135,180]; endpoints exact on 200 random".into())
}

fn random_pose(rng: &mut SeededStream) -> Pose2D {
    Pose2D {
        joints: std::array::from_fn(|_| {
            Keypoint::new(100.0 + 300.0 * rng.unit(), 80.0 + 300.0 * rng.unit(), 1.0)
        }),
    }
}

fn random_sequence(rng: &mut SeededStream) -> PoseSequence {
    let frames = (0..3 + rng.below(20))
        .map(|index| PoseFrame {
            index,
            pose: random_pose(rng),
            origin: None,
        })
        .collect();
    PoseSequence::new(frames, 30.0)
}

fn map_poses(seq: &PoseSequence, f: impl Fn(&Pose2D) -> Pose2D) -> PoseSequence {
    let mut out = seq.clone();
    for fr in &mut out.frames {
        fr.pose = f(&fr.pose);
    }
    out
}

fn features_of(seq: &PoseSequence) -> Result<FeatureTrajectory, String> {
    extract_features(seq, max_shoulder_separation(seq, 0.0)).map_err(|e| e.to_string())
}

/// Mirror image of the athlete: x reflected and sides swapped.
fn mirror(p: &Pose2D) -> Pose2D {
    let mut out = *p;
    for joint in Joint::ALL {
        let k = p.joint(joint.mirrored());
        *out.joint_mut(joint) = Keypoint::new(-k.x, k.y, k.confidence);
    }
    out
}

const SWAPPED: [(Feature, Feature); 5] = [
    (Feature::RightElbow, Feature::LeftElbow),
    (Feature::RightShoulder, Feature::LeftShoulder),
    (Feature::RightHip, Feature::LeftHip),
    (Feature::RightKnee, Feature::LeftKnee),
    (Feature::RightLeg, Feature::LeftLeg),
];

pub fn invariance(sequences: usize) -> Check {
    let mut rng = SeededStream::new(15);
    let mut worst_t: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    for s in 0..sequences {
        let seq = random_sequence(&mut rng);
        let base = features_of(&seq)?;
        let (dx, dy, k) = (
            rng.unit() * 500.0 - 250.0,
            rng.unit() * 500.0 - 250.0,
            0.3 + 3.0 * rng.unit(),
        );
        let moved = features_of(&map_poses(&seq, |p| {
            let mut q = *p;
            for j in &mut q.joints {
                *j = Keypoint::new(j.x * k + dx, j.y * k + dy, j.confidence);
            }
            q
        }))?;
        for (a, b) in base.angles.iter().zip(&moved.angles) {
            for c in 0..FEATURE_COUNT {
                worst_t = worst_t.max((a[c] - b[c]).abs());
            }
        }

        let mirrored = features_of(&map_poses(&seq, mirror))?;
        for (a, b) in base.angles.iter().zip(&mirrored.angles) {
            for (r, l) in SWAPPED {
                let sign = if r == Feature::RightLeg { -1.0 } else { 1.0 };
                worst_m = worst_m
                    .max((a[r.column()] - sign * b[l.column()]).abs())
                    .max((a[l.column()] - sign * b[r.column()]).abs());
            }
            worst_m = worst_m
                .max((a[Feature::Torso.column()] + b[Feature::Torso.column()]).abs())
                .max((a[Feature::Twist.column()] - b[Feature::Twist.column()]).abs());
        }
        if worst_t > 1e-6 || worst_m > 1e-6 {
            return Err(format!(
                "sequence {s}: translation/scale {worst_t:.2e}, mirror {worst_m:.2e}"
            ));
        }
    }
    Ok(format!(
        "{sequences} sequences; max deviation {worst_t:.1e} (moves), {worst_m:.1e} (mirror)"
    ))
}

fn clean_flight(code: &str) -> Result<FeatureTrajectory, String> {
    let stage = Stage::default();
    let model = SkillMotionModel::for_record(parse_code(code).unwrap().record());
    let s =
        generate_skill(&model, 30.0, &NoiseSpec::default(), &stage).map_err(|e| e.to_string())?;
    flight_features(&s.poses, s.flight, stage.shoulder_span()).map_err(|e| e.to_string())
}

pub fn construction() -> Check {
    let torso = unwrap(&clean_flight("BSSt")?.column(Feature::Torso));
    let net = torso.last().unwrap() - torso[0];
    if (net - 360.0).abs() > 1.0 {
        return Err(format!("BSSt torso turns {net:.3} degrees"));
    }
    let f0f = clean_flight("F0F")?;
    let mut spread: f64 = 0.0;
    for row in &f0f.angles {
        for (a, b) in row.iter().zip(&f0f.angles[0]) {
            spread = spread.max((a - b).abs());
        }
    }
    if spread > 1e-6 {
        return Err(format!("F0F angles vary by {spread:.3e}"));
    }
    Ok(format!(
        "BSSt net torso {net:.3} deg; F0F spread {spread:.1e}"
    ))
}

pub fn catalog() -> Check {
    let n = load_catalog().len();
    if n != 33 {
        return Err(format!("{n} catalog rows"));
    }
    for (code, tenths) in [("F0F", 0), ("BRIt", 6), ("CDI", 3), ("BSSs", 6)] {
        let t = lookup_tariff(code).map_err(|e| e.to_string())?;
        if t.tenths() != tenths {
            return Err(format!("{code} tariff {}", t.value()));
        }
    }
    Ok("33 rows; F0F 0.0, BRIt 0.6, CDI 0.3, BSSs 0.6".into())
}

pub const SEGMENTATION_SKILLS: [&str; 10] = [
    "FTF", "FPF", "FSF", "F1F", "F2F", "BSSt", "BSSp", "BSSs", "BRIt", "F0F",
];
const LEAD_IN: usize = 5;

pub fn segmentation(seed: u64) -> Check {
    let spec = RoutineSpec {
        skills: SEGMENTATION_SKILLS
            .iter()
            .map(|c| parse_code(c).unwrap())
            .collect(),
        in_bounces: 3,
        out_bounces: 1,
    };
    let noise = NoiseSpec {
        keypoint_sigma: 2.0,
        seed,
        ..NoiseSpec::default()
    };
    let stage = Stage::default();
    let r = generate_routine(&spec, 30.0, &noise, &stage).map_err(|e| e.to_string())?;
    let mut src = RenderedSource::new(r.poses.clone(), stage)
        .map_err(|e| e.to_string())?
        .with_lead_in(LEAD_IN);
    let cfg = PipelineConfig::default();
    if cfg.segmentation.apex_threshold != 0.5 {
        return Err("default apex threshold is not 0.5".into());
    }
    let mut src = Timed {
        inner: src,
        spent: 0.0,
    };
    let t = Instant::now();
    let ex = extract_routine(&mut src, &cfg.extraction, cfg.background_frames, None)
        .map_err(|e| e.to_string())?;
    let segs =
        segment_track_file(&ex.to_track_file(), &cfg.segmentation).map_err(|e| e.to_string())?;
    let render = src.spent;
    let secs = t.elapsed().as_secs_f64() - render;
    if segs.len() != r.segments.len() {
        return Err(format!(
            "{} segments, truth has {}",
            segs.len(),
            r.segments.len()
        ));
    }
    let mut within = 0;
    let mut flags = 0;
    for (got, want) in segs.iter().zip(&r.segments) {
        within += usize::from(got.start.abs_diff(want.start + LEAD_IN) <= 2);
        within += usize::from(got.end.abs_diff(want.end + LEAD_IN) <= 2);
        flags += usize::from(got.is_routine_jump == want.is_routine_jump);
    }
    let total = 2 * segs.len();
    let detail = format!(
        "{within}/{total} boundaries within 2 frames, {flags}/{} flags, {} frames in {secs:.2}s (+{render:.2}s rendering)",
        segs.len(),
        src_len(&r.poses)
    );
    if within * 100 >= 95 * total && flags == segs.len() && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Accumulates the time spent producing frames so synthesis can be
/// excluded from pipeline timings.
struct Timed<S> {
    inner: S,
    spent: f64,
}

impl<S: FrameSource> FrameSource for Timed<S> {
    fn info(&self) -> StreamInfo {
        self.inner.info()
    }

    fn read(&mut self, index: usize) -> bounce_core::Result<Frame> {
        let t = Instant::now();
        let f = self.inner.read(index);
        self.spent += t.elapsed().as_secs_f64();
        f
    }
}

fn src_len(poses: &PoseSequence) -> usize {
    poses.len() + LEAD_IN
}

pub fn evaluation(angle_sigma: f64) -> Result<(EvaluationReport, f64), String> {
    let noise = NoiseSpec {
        angle_sigma,
        seed: 7,
        ..NoiseSpec::default()
    };
    let t = Instant::now();
    let ds = synthetic_dataset(&builtin_models(), 10, 30.0, &noise, &Stage::default())
        .map_err(|e| e.to_string())?;
    let report = run_evaluation(
        &ds,
        &EvalConfig {
            rng_seed: 2024,
            ..EvalConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    Ok((report, t.elapsed().as_secs_f64()))
}

pub fn classification() -> Check {
    let (low, t_low) = evaluation(5.0)?;
    let (high, t_high) = evaluation(15.0)?;
    let (again, _) = evaluation(15.0)?;
    let same =
        high.to_json().map_err(|e| e.to_string())? == again.to_json().map_err(|e| e.to_string())?;
    let top = high.confusion.top_confusions();
    let dominant = top
        .first()
        .map(|(a, b, n)| (format!("{a}->{b}"), *n))
        .unwrap_or_default();
    let fpf_fsf = matches!(dominant.0.as_str(), "FPF->FSF" | "FSF->FPF");
    let detail = format!(
        "acc {:.3} at 5 deg ({t_low:.1}s), {:.3} at 15 deg ({t_high:.1}s), top confusion {} x{}, reproducible {same}",
        low.mean_accuracy, high.mean_accuracy, dominant.0, dominant.1
    );
    if low.mean_accuracy >= 0.95
        && high.mean_accuracy >= 0.50
        && fpf_fsf
        && same
        && t_low + t_high < 60.0
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Frames per second of body extraction on pre-rendered default-stage
/// frames, and the frame count.
pub fn extraction_fps(skills: &[&str]) -> Result<(f64, usize), String> {
    let spec = RoutineSpec {
        skills: skills.iter().map(|c| parse_code(c).unwrap()).collect(),
        ..RoutineSpec::default()
    };
    let stage = Stage::default();
    let r =
        generate_routine(&spec, 30.0, &NoiseSpec::default(), &stage).map_err(|e| e.to_string())?;
    let mut frames = vec![bounce_core::synth::render::scene(&stage); LEAD_IN];
    frames.extend(render_sequence(&r.poses, &stage));
    let n = frames.len();
    let mut src =
        bounce_core::frame_io::MemorySource::new(frames, 30.0).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let t = Instant::now();
    extract_routine(&mut src, &cfg.extraction, cfg.background_frames, None)
        .map_err(|e| e.to_string())?;
    Ok((n as f64 / t.elapsed().as_secs_f64(), n))
}
