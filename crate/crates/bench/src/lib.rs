//! Fixtures shared by the benchmarks.

use bounce_core::evaluation::LabelledExample;
use bounce_core::raster::Frame;
use bounce_core::synth::render::{render_sequence, scene};
use bounce_core::synth::{
    builtin_models, generate_routine, synthetic_dataset, NoiseSpec, RoutineSpec, Stage,
};
use bounce_core::{parse_code, PoseSequence};

/// A short routine rendered on the default stage, preceded by `lead_in`
/// empty-stage frames.
pub fn rendered_routine(skills: &[&str], lead_in: usize) -> (Vec<Frame>, PoseSequence) {
    let spec = RoutineSpec {
        skills: skills
            .iter()
            .map(|c| parse_code(c).expect("known code"))
            .collect(),
        ..RoutineSpec::default()
    };
    let stage = Stage::default();
    let r = generate_routine(&spec, 30.0, &NoiseSpec::default(), &stage).expect("valid routine");
    let mut frames = vec![scene(&stage); lead_in];
    frames.extend(render_sequence(&r.poses, &stage));
    (frames, r.poses)
}

/// Ten noisy examples of every built-in skill model.
pub fn dataset(angle_sigma: f64) -> Vec<LabelledExample> {
    let noise = NoiseSpec {
        angle_sigma,
        seed: 7,
        ..NoiseSpec::default()
    };
    synthetic_dataset(&builtin_models(), 10, 30.0, &noise, &Stage::default())
        .expect("built-in models are valid")
}
