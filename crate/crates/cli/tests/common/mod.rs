#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use bounce_cli::commands::{self, ExtractArgs, GenerateArgs, RoutineTruth};
use bounce_cli::store::{read_json, RoutinePaths, ROUTINES_DIR};
use bounce_core::synth::NoiseSpec;
use bounce_core::PipelineConfig;
use tempfile::TempDir;

pub const ROUTINE_ID: &str = "r1";
pub const SKILLS: [&str; 3] = ["FTF", "BSSt", "FPF"];

pub fn generate_args(out: &Path, codes: &[&str]) -> GenerateArgs {
    GenerateArgs {
        codes: codes.iter().map(|c| c.to_string()).collect(),
        routine: false,
        in_bounces: 2,
        out_bounces: 1,
        seed: 4,
        fps: 30.0,
        out: out.to_path_buf(),
        noise: NoiseSpec {
            keypoint_sigma: 1.0,
            ..NoiseSpec::default()
        },
        count: 1,
        features: false,
        render: false,
        lead_in: 5,
        models: None,
        width: None,
    }
}

/// Rendered routine under `<root>/clip`, with poses and truth.
pub fn render_routine(root: &Path) -> RoutineTruth {
    let mut args = generate_args(&root.join("clip"), &SKILLS);
    args.routine = true;
    args.render = true;
    commands::generate(&args).unwrap();
    read_json(&root.join("clip/truth.json")).unwrap()
}

struct Fixture {
    _dir: TempDir,
    data: PathBuf,
}

/// Data directory holding one extracted routine with features; built once
/// per test binary.
fn template() -> &'static Path {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE
        .get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            render_routine(dir.path());
            let data = dir.path().join("data");
            let paths = RoutinePaths::new(data.join(ROUTINES_DIR).join(ROUTINE_ID));
            let cfg = PipelineConfig::default();
            commands::extract(&ExtractArgs {
                frames: dir.path().join("clip/frames"),
                out: paths.dir.clone(),
                config: cfg.clone(),
                fps: None,
                line: None,
                id: None,
                crops: true,
            })
            .unwrap();
            std::fs::copy(dir.path().join("clip/poses.jsonl"), paths.poses()).unwrap();
            commands::features(
                &paths.poses(),
                &paths.segments(),
                &paths.features_dir(),
                &cfg,
            )
            .unwrap();
            Fixture { _dir: dir, data }
        })
        .data
        .as_path()
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// Fresh copy of the template data directory.
pub fn data_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_tree(template(), dir.path());
    dir
}
