//! Repeated random sub-sampling evaluation: per iteration, a subset of each
//! skill's examples is drawn, split into references and tests, and the test
//! examples are classified against the references.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{parse_code, SkillCode};
use crate::classifier::{classify, Provenance, ReferenceSet};
use crate::error::{Error, Result};
use crate::features::FeatureTrajectory;
use crate::fsutil::write_atomic;
use crate::rng::SeededStream;

pub const PROTOCOL_NAME: &str = "repeated random sub-sampling";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub references_per_skill: usize,
    pub tests_per_skill: usize,
    pub subset_size: usize,
    pub iterations: usize,
    /// Skills with fewer examples than this are left out entirely.
    pub min_examples: usize,
    pub rng_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            references_per_skill: 5,
            tests_per_skill: 5,
            subset_size: 10,
            iterations: 20,
            min_examples: 10,
            rng_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.references_per_skill == 0
            || self.tests_per_skill == 0
            || self.subset_size == 0
            || self.iterations == 0
            || self.min_examples == 0
        {
            return Err(Error::InvalidConfig(
                "evaluation counts must be positive".into(),
            ));
        }
        if self.references_per_skill + self.tests_per_skill > self.subset_size {
            return Err(Error::InvalidConfig(format!(
                "references ({}) + tests ({}) exceed subset size {}",
                self.references_per_skill, self.tests_per_skill, self.subset_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledExample {
    pub code: SkillCode,
    pub trajectory: FeatureTrajectory,
}

/// Rows are the true skill, columns the predicted one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<SkillCode>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<SkillCode>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn index_of(&self, code: SkillCode) -> Option<usize> {
        self.labels.iter().position(|&c| c == code)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn normalised(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    /// Off-diagonal cells sorted by count, largest first.
    pub fn top_confusions(&self) -> Vec<(SkillCode, SkillCode, u64)> {
        let mut cells = Vec::new();
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i != j && c > 0 {
                    cells.push((self.labels[i], self.labels[j], c));
                }
            }
        }
        cells.sort_by_key(|c| std::cmp::Reverse(c.2));
        cells
    }
}

/// Fraction of predictions on the diagonal.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub iteration: usize,
    pub example: usize,
    pub truth: SkillCode,
    pub predicted: SkillCode,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: String,
    pub mean_accuracy: f64,
    pub per_iteration: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub excluded: Vec<SkillCode>,
    #[serde(default)]
    pub confusion_csv_path: Option<String>,
    pub config: EvalConfig,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Iteration {
    accuracy: f64,
    predictions: Vec<Prediction>,
}

pub fn run_evaluation(dataset: &[LabelledExample], cfg: &EvalConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let mut by_code: BTreeMap<SkillCode, Vec<usize>> = BTreeMap::new();
    for (i, ex) in dataset.iter().enumerate() {
        by_code.entry(ex.code).or_default().push(i);
    }
    let mut groups: Vec<(SkillCode, Vec<usize>)> = by_code.into_iter().collect();
    groups.sort_by_key(|(c, _)| c.catalog_index());
    let (included, excluded): (Vec<_>, Vec<_>) = groups
        .into_iter()
        .partition(|(_, idx)| idx.len() >= cfg.min_examples);
    if included.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no skill has at least {} examples",
            cfg.min_examples
        )));
    }
    if let Some((code, idx)) = included.iter().find(|(_, idx)| idx.len() < cfg.subset_size) {
        return Err(Error::InsufficientExamples {
            code: code.to_string(),
            available: idx.len(),
            required: cfg.subset_size,
        });
    }

    let mut master = SeededStream::new(cfg.rng_seed);
    let seeds: Vec<u64> = (0..cfg.iterations).map(|_| master.next_u64()).collect();
    let iterations = seeds
        .par_iter()
        .enumerate()
        .map(|(it, &seed)| run_iteration(dataset, &included, cfg, it, seed))
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<SkillCode> = included.iter().map(|(c, _)| *c).collect();
    let mut confusion = ConfusionMatrix::new(labels);
    let mut predictions = Vec::new();
    let mut per_iteration = Vec::with_capacity(iterations.len());
    for it in iterations {
        for p in &it.predictions {
            let t = confusion
                .index_of(p.truth)
                .expect("truth is an included label");
            let q = confusion
                .index_of(p.predicted)
                .expect("references only hold included labels");
            confusion.record(t, q);
        }
        per_iteration.push(it.accuracy);
        predictions.extend(it.predictions);
    }
    let mean_accuracy = per_iteration.iter().sum::<f64>() / per_iteration.len() as f64;
    Ok(EvaluationReport {
        protocol: PROTOCOL_NAME.to_string(),
        mean_accuracy,
        per_iteration,
        confusion,
        excluded: excluded.into_iter().map(|(c, _)| c).collect(),
        confusion_csv_path: None,
        config: cfg.clone(),
        predictions,
    })
}

fn run_iteration(
    dataset: &[LabelledExample],
    groups: &[(SkillCode, Vec<usize>)],
    cfg: &EvalConfig,
    iteration: usize,
    seed: u64,
) -> Result<Iteration> {
    let mut rng = SeededStream::new(seed);
    let mut refs = ReferenceSet::new();
    let mut tests = Vec::new();
    let mut ref_examples = Vec::new();
    for (code, idx) in groups {
        let picked = rng.sample_indices(idx.len(), cfg.subset_size);
        let (r, rest) = picked.split_at(cfg.references_per_skill);
        for &k in r {
            ref_examples.push(idx[k]);
            refs.push(
                *code,
                dataset[idx[k]].trajectory.clone(),
                Provenance::default(),
            );
        }
        tests.extend(rest[..cfg.tests_per_skill].iter().map(|&k| idx[k]));
    }
    assert!(
        tests.iter().all(|t| !ref_examples.contains(t)),
        "reference and test examples overlap"
    );
    let predictions = tests
        .iter()
        .map(|&ex| {
            let result = classify(&dataset[ex].trajectory, &refs)?;
            Ok(Prediction {
                iteration,
                example: ex,
                truth: dataset[ex].code,
                predicted: result.best,
                mse: result.best_mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions
        .iter()
        .filter(|p| p.truth == p.predicted)
        .count();
    Ok(Iteration {
        accuracy: correct as f64 / predictions.len() as f64,
        predictions,
    })
}

/// Path of the row-normalised companion of a counts CSV.
pub fn normalised_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("confusion");
    path.with_file_name(format!("{stem}_normalised.csv"))
}

fn csv_bytes<T: ToString>(labels: &[SkillCode], rows: &[Vec<T>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["truth".to_string()];
    header.extend(labels.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for (label, row) in labels.iter().zip(rows) {
        let mut rec = vec![label.to_string()];
        rec.extend(row.iter().map(T::to_string));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

/// Writes integer counts to `path` and row-normalised rates next to it.
/// Returns the normalised file's path.
pub fn export_confusion(cm: &ConfusionMatrix, path: &Path) -> Result<PathBuf> {
    write_atomic(path, &csv_bytes(&cm.labels, &cm.counts)?)?;
    let norm = normalised_path(path);
    write_atomic(&norm, &csv_bytes(&cm.labels, &cm.normalised())?)?;
    Ok(norm)
}

pub fn read_confusion(path: &Path) -> Result<ConfusionMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(bad(1, "missing header".into())),
    };
    if header.get(0) != Some("truth") {
        return Err(bad(1, "first header cell must be `truth`".into()));
    }
    let labels = header
        .iter()
        .skip(1)
        .map(parse_code)
        .collect::<Result<Vec<_>>>()?;
    let mut cm = ConfusionMatrix::new(labels);
    let n = cm.labels.len();
    let mut seen = 0;
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        if i >= n || rec.len() != n + 1 {
            return Err(bad(
                line,
                format!("expected {n} labelled rows of {} cells", n + 1),
            ));
        }
        if rec.get(0) != Some(cm.labels[i].as_str()) {
            return Err(bad(line, "row label does not match header order".into()));
        }
        for j in 0..n {
            cm.counts[i][j] = rec[j + 1]
                .parse()
                .map_err(|e| bad(line, format!("count `{}`: {e}", &rec[j + 1])))?;
        }
        seen += 1;
    }
    if seen != n {
        return Err(bad(seen + 2, format!("expected {n} rows, found {seen}")));
    }
    Ok(cm)
}
