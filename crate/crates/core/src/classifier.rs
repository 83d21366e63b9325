//! Nearest-neighbour skill identification.
//!
//! References are linearly resampled to the observed trajectory's length and
//! compared by mean squared angle error over all frames and features. The
//! reference with the smallest error names the skill.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::SkillCode;
use crate::error::{Error, Result};
use crate::features::{FeatureTrajectory, FeatureVector, FEATURE_COUNT};
use crate::fsutil::write_atomic;

/// Linear interpolation of every column onto `target_len` uniformly spaced
/// samples. Endpoints are kept exactly; a sample that falls on an original
/// node takes that node's value.
pub fn resample(trajectory: &FeatureTrajectory, target_len: usize) -> Result<FeatureTrajectory> {
    let n = trajectory.len();
    if n < 2 {
        return Err(Error::TrajectoryTooShort(n));
    }
    if target_len < 2 {
        return Err(Error::TrajectoryTooShort(target_len));
    }
    if target_len == n {
        return Ok(trajectory.clone());
    }
    let src = &trajectory.angles;
    let span = (n - 1) as f64;
    let denom = (target_len - 1) as f64;
    let angles = (0..target_len)
        .map(|k| {
            let pos = k as f64 * span / denom;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 || i + 1 >= n {
                return src[i.min(n - 1)];
            }
            let mut row = [0.0; FEATURE_COUNT];
            for (c, slot) in row.iter_mut().enumerate() {
                let (a, b) = (src[i][c], src[i + 1][c]);
                *slot = a + frac * (b - a);
            }
            row
        })
        .collect();
    Ok(FeatureTrajectory {
        skill_ref: trajectory.skill_ref.clone(),
        fps: trajectory.fps * (target_len - 1) as f64 / span,
        angles,
    })
}

/// Mean squared error over `T` frames and the twelve features.
pub fn mse(observed: &FeatureTrajectory, reference: &FeatureTrajectory) -> Result<f64> {
    mse_rows(&observed.angles, &reference.angles)
}

fn mse_rows(a: &[FeatureVector], b: &[FeatureVector]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum();
    Ok(sum / (a.len() * FEATURE_COUNT) as f64)
}

/// Where a reference example came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub routine_id: Option<String>,
    #[serde(default)]
    pub athlete_id: Option<String>,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub created_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSkill {
    pub id: String,
    pub code: SkillCode,
    pub trajectory: FeatureTrajectory,
    #[serde(default)]
    pub provenance: Provenance,
}

pub const REFERENCE_SET_VERSION: u32 = 1;

/// Labelled trajectories in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub version: u32,
    pub entries: Vec<ReferenceSkill>,
}

impl Default for ReferenceSet {
    fn default() -> Self {
        ReferenceSet {
            version: REFERENCE_SET_VERSION,
            entries: Vec::new(),
        }
    }
}

impl ReferenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends an entry with the next free `ref-NNNNN` id and returns it.
    pub fn push(
        &mut self,
        code: SkillCode,
        trajectory: FeatureTrajectory,
        provenance: Provenance,
    ) -> &ReferenceSkill {
        let next = self
            .entries
            .iter()
            .filter_map(|e| {
                e.id.strip_prefix("ref-")
                    .and_then(|n| n.parse::<u64>().ok())
            })
            .max()
            .map_or(0, |m| m + 1);
        self.entries.push(ReferenceSkill {
            id: format!("ref-{next:05}"),
            code,
            trajectory,
            provenance,
        });
        self.entries.last().expect("just pushed")
    }

    pub fn remove(&mut self, id: &str) -> Option<ReferenceSkill> {
        let pos = self.entries.iter().position(|e| e.id == id)?;
        Some(self.entries.remove(pos))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: ReferenceSet = serde_json::from_str(&text)?;
        for e in &set.entries {
            e.trajectory.validate()?;
        }
        Ok(set)
    }

    /// Writes the set to a temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        write_atomic(path.as_ref(), &json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedReference {
    pub reference_id: String,
    pub code: SkillCode,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub best: SkillCode,
    pub best_mse: f64,
    pub ranked: Vec<RankedReference>,
}

/// Ranks every reference by error against `observed`. Equal errors keep
/// reference-set order.
pub fn classify(observed: &FeatureTrajectory, refs: &ReferenceSet) -> Result<ClassificationResult> {
    if refs.is_empty() {
        return Err(Error::EmptyReferenceSet);
    }
    let t = observed.len();
    let mut ranked = refs
        .entries
        .iter()
        .map(|r| {
            let aligned = resample(&r.trajectory, t)?;
            Ok(RankedReference {
                reference_id: r.id.clone(),
                code: r.code,
                mse: mse(observed, &aligned)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Stable sort keeps insertion order among ties.
    ranked.sort_by(|a, b| a.mse.total_cmp(&b.mse));
    Ok(ClassificationResult {
        best: ranked[0].code,
        best_mse: ranked[0].mse,
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_code;
    use proptest::prelude::*;

    fn traj(rows: Vec<FeatureVector>) -> FeatureTrajectory {
        FeatureTrajectory::new(rows, 30.0)
    }

    fn column_traj(col: &[f64]) -> FeatureTrajectory {
        traj(col.iter().map(|&v| [v; FEATURE_COUNT]).collect())
    }

    #[test]
    fn linear_midpoints() {
        let r = resample(&column_traj(&[0.0, 90.0, 180.0]), 5).unwrap();
        let col: Vec<f64> = r.angles.iter().map(|row| row[3]).collect();
        assert_eq!(col, vec![0.0, 45.0, 90.0, 135.0, 180.0]);
    }

    #[test]
    fn own_length_is_identity() {
        let t = column_traj(&[1.5, -3.0, 7.25, 9.0]);
        assert_eq!(resample(&t, 4).unwrap(), t);
        assert!(resample(&t, 1).is_err());
        assert!(resample(&column_traj(&[1.0]), 5).is_err());
    }

    #[test]
    fn mse_cases() {
        let a = traj((0..6).map(|i| [i as f64 * 7.0; FEATURE_COUNT]).collect());
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = traj(a.angles.iter().map(|r| r.map(|v| v + 3.0)).collect());
        assert_eq!(mse(&a, &b).unwrap(), 9.0);
        let short = traj(a.angles[..3].to_vec());
        assert!(matches!(
            mse(&a, &short),
            Err(Error::ShapeMismatch { left: 6, right: 3 })
        ));
    }

    fn refset(entries: &[(&str, FeatureTrajectory)]) -> ReferenceSet {
        let mut set = ReferenceSet::new();
        for (code, t) in entries {
            set.push(parse_code(code).unwrap(), t.clone(), Provenance::default());
        }
        set
    }

    #[test]
    fn exact_match_ranks_first() {
        let obs = column_traj(&[0.0, 50.0, 100.0, 50.0]);
        let set = refset(&[
            ("F0F", column_traj(&[0.0, 0.0, 0.0])),
            ("FTF", obs.clone()),
            ("FPF", column_traj(&[10.0, 60.0, 110.0, 60.0, 10.0])),
        ]);
        let r = classify(&obs, &set).unwrap();
        assert_eq!(r.best.as_str(), "FTF");
        assert_eq!(r.best_mse, 0.0);
        assert_eq!(r.ranked[0].reference_id, "ref-00001");
        assert!(r.ranked.windows(2).all(|w| w[0].mse <= w[1].mse));
    }

    #[test]
    fn ties_go_to_earlier_entry() {
        let t = column_traj(&[5.0, 6.0, 7.0]);
        let set = refset(&[("FSF", t.clone()), ("FPF", t.clone())]);
        let r = classify(&column_traj(&[1.0, 2.0, 3.0]), &set).unwrap();
        assert_eq!(r.best.as_str(), "FSF");
        assert!(matches!(
            classify(&t, &ReferenceSet::new()),
            Err(Error::EmptyReferenceSet)
        ));
    }

    #[test]
    fn ids_continue_after_removal() {
        let t = column_traj(&[5.0, 6.0]);
        let mut set = refset(&[("FSF", t.clone()), ("FPF", t.clone())]);
        assert!(set.remove("ref-00000").is_some());
        assert!(set.remove("ref-00000").is_none());
        assert_eq!(
            set.push(parse_code("F0F").unwrap(), t, Provenance::default())
                .id,
            "ref-00002"
        );
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.json");
        let set = refset(&[("BRIt", column_traj(&[0.1, 0.2, 0.3]))]);
        set.save(&path).unwrap();
        assert_eq!(ReferenceSet::load(&path).unwrap(), set);
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["entries"][0]["code"], "BRIt");
    }

    fn arb_traj(len: std::ops::Range<usize>) -> impl Strategy<Value = FeatureTrajectory> {
        proptest::collection::vec(proptest::array::uniform12(-720.0f64..720.0), len).prop_map(traj)
    }

    proptest! {
        #[test]
        fn mse_is_a_symmetric_nonnegative_form(a in arb_traj(2..20), shift in -100.0f64..100.0) {
            let b = traj(a.angles.iter().rev().copied().collect());
            let ab = mse(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, mse(&b, &a).unwrap());
            prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
            let a2 = traj(a.angles.iter().map(|r| r.map(|v| v + shift)).collect());
            let b2 = traj(b.angles.iter().map(|r| r.map(|v| v + shift)).collect());
            prop_assert!((mse(&a2, &b2).unwrap() - ab).abs() <= 1e-9 * ab.max(1.0));
        }

        #[test]
        fn refinement_round_trip_keeps_nodes(a in arb_traj(2..15), m in 1usize..6) {
            let fine = (a.len() - 1) * m + 1;
            let there = resample(&a, fine).unwrap();
            for (j, row) in a.angles.iter().enumerate() {
                prop_assert_eq!(&there.angles[j * m], row);
            }
            let back = resample(&there, a.len()).unwrap();
            prop_assert_eq!(back.angles, a.angles);
        }

        #[test]
        fn classify_is_deterministic(obs in arb_traj(2..10), refs in proptest::collection::vec(arb_traj(2..10), 1..6)) {
            let codes = ["F0F", "FTF", "FPF", "FSF", "F1F", "F2F"];
            let entries: Vec<(&str, FeatureTrajectory)> =
                refs.into_iter().enumerate().map(|(i, t)| (codes[i], t)).collect();
            let set = refset(&entries);
            let a = serde_json::to_string(&classify(&obs, &set).unwrap()).unwrap();
            let b = serde_json::to_string(&classify(&obs, &set).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
