//! Command implementations shared by the binary and the tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bounce_core::classifier::{
    classify as classify_trajectory, ClassificationResult, Provenance, ReferenceSet,
};
use bounce_core::config::PipelineConfig;
use bounce_core::evaluation::{
    export_confusion, run_evaluation, EvaluationReport, LabelledExample,
};
use bounce_core::extraction::TrampolineLine;
use bounce_core::features::FeatureTrajectory;
use bounce_core::frame_io::{encode_png, open_source, write_source_png};
use bounce_core::pipeline::{extract_routine, routine_features, segment_track_file};
use bounce_core::pose::{load_pose_sequence, write_pose_sequence, PoseSequence};
use bounce_core::rng::SeededStream;
use bounce_core::segmentation::{BounceSegment, SegmentsDocument};
use bounce_core::synth::render::RenderedSource;
use bounce_core::synth::{
    flight_features, generate_routine, generate_skill, NoiseSpec, RoutineSpec, SkillMotionModel,
    Stage, TruthSegment,
};
use bounce_core::{parse_code, SkillCode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::store::{
    feature_file, read_json, valid_id, write_json, CropOverlay, RoutinePaths, RoutineRecord,
};

pub type CmdResult<T> = Result<T, CliError>;

pub fn load_config(path: Option<&Path>) -> CmdResult<PipelineConfig> {
    match path {
        Some(p) => {
            Ok(PipelineConfig::load(p)
                .with_context(|| format!("loading config {}", p.display()))?)
        }
        None => Ok(PipelineConfig::default()),
    }
}

#[derive(Debug, Clone)]
pub struct ExtractArgs {
    pub frames: PathBuf,
    pub out: PathBuf,
    pub config: PipelineConfig,
    pub fps: Option<f64>,
    pub line: Option<usize>,
    pub id: Option<String>,
    pub crops: bool,
}

#[derive(Debug, Clone)]
pub struct ExtractOutcome {
    pub record: RoutineRecord,
    pub segments: Vec<BounceSegment>,
    pub crops: usize,
}

/// Body extraction and segmentation. Writes `routine.json`, `track.json`,
/// `segments.json` and, optionally, the athlete crops into `out`.
///
/// A segmentation failure still leaves the track on disk.
pub fn extract(args: &ExtractArgs) -> CmdResult<ExtractOutcome> {
    let id = match &args.id {
        Some(id) => id.clone(),
        None => args
            .out
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| {
                CliError::input(anyhow!(
                    "cannot derive a routine id from {}",
                    args.out.display()
                ))
            })?
            .to_string(),
    };
    if !valid_id(&id) {
        return Err(CliError::input(anyhow!(
            "routine id `{id}` may only hold letters, digits, `-` and `_`"
        )));
    }
    args.config.validate()?;
    let cfg = &args.config;
    let mut source = open_source(&args.frames, args.fps)
        .with_context(|| format!("opening frames {}", args.frames.display()))?;
    let info = source.info();
    let line = args
        .line
        .map(|row| TrampolineLine::user_adjusted(row, info.height))
        .transpose()
        .map_err(CliError::input)?;
    let extraction = extract_routine(
        source.as_mut(),
        &cfg.extraction,
        cfg.background_frames,
        line,
    )?;
    let track = extraction.to_track_file();
    let paths = RoutinePaths::new(&args.out);
    write_json(&paths.track(), &track)?;

    let labels = read_json::<RoutineRecord>(&paths.record())
        .map(|r| r.labels)
        .unwrap_or_default();
    let record = RoutineRecord {
        id: id.clone(),
        source: Some(args.frames.display().to_string()),
        frame_count: info.frame_count,
        fps: info.fps,
        trampoline_line: extraction.line,
        labels,
    };
    write_json(&paths.record(), &record)?;

    let mut crops = 0;
    if args.crops {
        let dir = paths.crops();
        if dir.exists() {
            std::fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        crops = extraction.for_each_crop(source.as_mut(), &cfg.extraction, |f, crop| {
            let sil = f
                .silhouette
                .as_ref()
                .expect("crops only for frames with a subject");
            let (ox, oy) = (crop.origin.0 as f64, crop.origin.1 as f64);
            let shift =
                |p: bounce_core::raster::Point| bounce_core::raster::Point::new(p.x - ox, p.y - oy);
            let overlay = CropOverlay {
                frame: f.index,
                origin: crop.origin,
                side: crop.image.width(),
                centroid: shift(sil.centroid),
                bbox: bounce_core::raster::Rect {
                    x_min: sil.bbox.x_min - ox,
                    y_min: sil.bbox.y_min - oy,
                    x_max: sil.bbox.x_max - ox,
                    y_max: sil.bbox.y_max - oy,
                },
                hull: sil.hull.iter().map(|&p| shift(p)).collect(),
                trampoline_row: extraction.line.top_row as i64 - crop.origin.1,
            };
            bounce_core::fsutil::write_atomic(&paths.crop(f.index), &encode_png(&crop.image)?)?;
            let json = serde_json::to_vec_pretty(&overlay)?;
            bounce_core::fsutil::write_atomic(&paths.overlay(f.index), &json)
        })?;
    }

    let segments = segment_track_file(&track, &cfg.segmentation)
        .with_context(|| format!("segmenting routine {id}"))?;
    let doc = SegmentsDocument {
        routine_id: id,
        segments: segments.clone(),
    };
    write_json(&paths.segments(), &doc)?;
    Ok(ExtractOutcome {
        record,
        segments,
        crops,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FeaturesOutcome {
    pub written: Vec<(usize, PathBuf)>,
    pub failed: Vec<(usize, String)>,
}

/// Smoothing and feature extraction for every routine jump. Writes
/// `segment_NNN.json` per segment into `out`.
pub fn features(
    poses: &Path,
    segments: &Path,
    out: &Path,
    config: &PipelineConfig,
) -> CmdResult<FeaturesOutcome> {
    config.validate()?;
    let poses =
        load_pose_sequence(poses).with_context(|| format!("loading poses {}", poses.display()))?;
    let doc: SegmentsDocument = read_json(segments)?;
    let results = routine_features(&poses, &doc.segments, &config.pose)?;
    let mut outcome = FeaturesOutcome {
        written: Vec::new(),
        failed: Vec::new(),
    };
    for r in results {
        match r.trajectory {
            Ok(t) => {
                let path = feature_file(out, r.segment);
                write_json(&path, &t)?;
                outcome.written.push((r.segment, path));
            }
            Err(e) => outcome.failed.push((r.segment, e.to_string())),
        }
    }
    if outcome.written.is_empty() {
        return Err(CliError::pipeline(anyhow!(
            "no routine jump yielded features ({} failed)",
            outcome.failed.len()
        )));
    }
    Ok(outcome)
}

pub fn load_trajectory(path: &Path) -> CmdResult<FeatureTrajectory> {
    let t: FeatureTrajectory = read_json(path)?;
    t.validate()
        .with_context(|| format!("validating {}", path.display()))?;
    Ok(t)
}

pub fn load_refs(path: &Path) -> CmdResult<ReferenceSet> {
    Ok(ReferenceSet::load(path)
        .with_context(|| format!("loading reference set {}", path.display()))?)
}

/// Ranks every reference by mean squared error against the trajectory.
pub fn classify(features: &Path, refs: &Path) -> CmdResult<ClassificationResult> {
    let observed = load_trajectory(features)?;
    let refs = load_refs(refs)?;
    if refs.is_empty() {
        return Err(CliError::input(bounce_core::Error::EmptyReferenceSet));
    }
    Ok(classify_trajectory(&observed, &refs)?)
}

/// Appends a labelled trajectory to a reference set, creating the file if
/// needed. Returns the new entry id.
pub fn label(
    features: &Path,
    code: &str,
    refs: &Path,
    provenance: Provenance,
) -> CmdResult<String> {
    let code = parse_code(code).map_err(CliError::input)?;
    let trajectory = load_trajectory(features)?;
    let mut set = if refs.exists() {
        load_refs(refs)?
    } else {
        ReferenceSet::new()
    };
    let id = set.push(code, trajectory, provenance).id.clone();
    set.save(refs)?;
    Ok(id)
}

/// Labelled examples from a reference-set file, or from a directory of
/// trajectory files whose `skill_ref` holds the label.
pub fn load_dataset(path: &Path) -> CmdResult<Vec<LabelledExample>> {
    if path.is_file() {
        let set = load_refs(path)?;
        return Ok(set
            .entries
            .into_iter()
            .map(|e| LabelledExample {
                code: e.code,
                trajectory: e.trajectory,
            })
            .collect());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading dataset {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let trajectory = load_trajectory(&f)?;
        let label = trajectory
            .skill_ref
            .as_deref()
            .ok_or_else(|| CliError::input(anyhow!("{} has no skill_ref label", f.display())))?;
        let code = parse_code(label).with_context(|| format!("label in {}", f.display()))?;
        out.push(LabelledExample { code, trajectory });
    }
    if out.is_empty() {
        return Err(CliError::input(anyhow!(
            "dataset {} holds no trajectories",
            path.display()
        )));
    }
    Ok(out)
}

/// Runs the sub-sampling evaluation and writes the report (and, when
/// asked, the confusion CSVs).
pub fn evaluate(
    dataset: &Path,
    config: &PipelineConfig,
    out: Option<&Path>,
    confusion: Option<&Path>,
) -> CmdResult<EvaluationReport> {
    config.validate()?;
    let examples = load_dataset(dataset)?;
    let mut report = run_evaluation(&examples, &config.evaluation)?;
    if let Some(path) = confusion {
        export_confusion(&report.confusion, path)?;
        report.confusion_csv_path = Some(path.display().to_string());
    }
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub codes: Vec<String>,
    pub routine: bool,
    pub in_bounces: usize,
    pub out_bounces: usize,
    pub seed: u64,
    pub fps: f64,
    pub out: PathBuf,
    pub noise: NoiseSpec,
    pub count: usize,
    pub features: bool,
    pub render: bool,
    pub lead_in: usize,
    pub models: Option<PathBuf>,
    pub width: Option<usize>,
}

/// Ground truth written beside a generated routine. Frame indices already
/// include the lead-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineTruth {
    pub fps: f64,
    pub lead_in: usize,
    pub segments: Vec<TruthSegment>,
}

fn models_for(codes: &[SkillCode], extra: Option<&Path>) -> CmdResult<Vec<SkillMotionModel>> {
    let custom: Vec<SkillMotionModel> = match extra {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    for m in &custom {
        m.validate().map_err(CliError::input)?;
    }
    Ok(codes
        .iter()
        .map(|c| {
            custom
                .iter()
                .find(|m| m.code == *c)
                .cloned()
                .unwrap_or_else(|| SkillMotionModel::for_record(c.record()))
        })
        .collect())
}

fn shift_frames(poses: &mut PoseSequence, by: usize) {
    for f in &mut poses.frames {
        f.index += by;
    }
}

/// Synthetic poses. Without `routine`, one pose file per requested sample
/// (`<code>.jsonl`, or `<code>_NNN.jsonl` when a code repeats); with it, a
/// single routine as `poses.jsonl` plus `truth.json`, and rendered frames
/// under `frames/` on request.
pub fn generate(args: &GenerateArgs) -> CmdResult<Vec<PathBuf>> {
    if args.codes.is_empty() {
        return Err(CliError::input(anyhow!("no skill codes given")));
    }
    let codes = args
        .codes
        .iter()
        .map(|c| parse_code(c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::input)?;
    args.noise.validate().map_err(CliError::input)?;
    if args.count == 0 {
        return Err(CliError::input(anyhow!("--count must be at least 1")));
    }
    let stage = args.width.map_or_else(Stage::default, Stage::scaled);
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let models = models_for(&codes, args.models.as_deref())?;
    let mut written = Vec::new();

    if args.routine {
        let spec = RoutineSpec {
            skills: codes,
            in_bounces: args.in_bounces,
            out_bounces: args.out_bounces,
        };
        let noise = NoiseSpec {
            seed: args.seed,
            ..args.noise
        };
        let r = generate_routine(&spec, args.fps, &noise, &stage).map_err(CliError::input)?;
        let lead = if args.render { args.lead_in } else { 0 };
        if args.render {
            let mut src = RenderedSource::new(r.poses.clone(), stage)?.with_lead_in(lead);
            let dir = args.out.join("frames");
            write_source_png(&mut src, &dir)?;
            written.push(dir);
        }
        let mut poses = r.poses;
        shift_frames(&mut poses, lead);
        let pose_path = args.out.join("poses.jsonl");
        write_pose_sequence(&poses, &pose_path)?;
        written.push(pose_path);
        let truth = RoutineTruth {
            fps: args.fps,
            lead_in: lead,
            segments: r
                .segments
                .into_iter()
                .map(|s| TruthSegment {
                    start: s.start + lead,
                    end: s.end + lead,
                    flight: (s.flight.0 + lead, s.flight.1 + lead),
                    ..s
                })
                .collect(),
        };
        let truth_path = args.out.join("truth.json");
        write_json(&truth_path, &truth)?;
        written.push(truth_path);
        return Ok(written);
    }

    let mut seen: BTreeMap<SkillCode, usize> = BTreeMap::new();
    for c in &codes {
        *seen.entry(*c).or_default() += args.count;
    }
    let mut seeds = SeededStream::new(args.seed);
    let mut next_index: BTreeMap<SkillCode, usize> = BTreeMap::new();
    for model in &models {
        for _ in 0..args.count {
            let k = next_index.entry(model.code).or_default();
            let stem = if seen[&model.code] == 1 {
                model.code.to_string()
            } else {
                format!("{}_{:03}", model.code, k)
            };
            *k += 1;
            let noise = NoiseSpec {
                seed: seeds.next_u64(),
                ..args.noise
            };
            let sample = generate_skill(model, args.fps, &noise, &stage)?;
            let pose_path = args.out.join(format!("{stem}.jsonl"));
            write_pose_sequence(&sample.poses, &pose_path)?;
            written.push(pose_path);
            if args.features {
                let mut t = flight_features(&sample.poses, sample.flight, stage.shoulder_span())?;
                t.skill_ref = Some(model.code.to_string());
                let path = args.out.join(format!("{stem}.json"));
                write_json(&path, &t)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
