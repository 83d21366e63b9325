//! Splitting a routine into bounces from the vertical centroid track.
//!
//! Image y grows downward, so the lowest body positions (bed contact) are
//! maxima of y. Bounce boundaries are those maxima; the apex of each bounce
//! is the minimum y between two boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub smooth_window: usize,
    pub min_separation: usize,
    /// Minimum prominence as a fraction of the smoothed track's amplitude.
    pub min_prominence_fraction: f64,
    pub apex_threshold: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            smooth_window: 5,
            min_separation: 10,
            min_prominence_fraction: 0.05,
            apex_threshold: 0.5,
        }
    }
}

/// Per-frame centroid positions; `None` marks frames without a subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidTrack {
    pub samples: Vec<Option<Point>>,
    pub fps: f64,
    /// Bed line row, the zero of apex heights. When absent the lowest point
    /// of the track is used.
    #[serde(default)]
    pub trampoline_row: Option<f64>,
}

impl CentroidTrack {
    pub fn new(samples: Vec<Option<Point>>, fps: f64) -> Self {
        CentroidTrack {
            samples,
            fps,
            trampoline_row: None,
        }
    }

    pub fn with_trampoline_row(mut self, row: f64) -> Self {
        self.trampoline_row = Some(row);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Vertical positions with missing frames linearly interpolated and
    /// leading/trailing gaps held at the nearest valid sample.
    pub fn interpolated_y(&self) -> Result<Vec<f64>> {
        let ys: Vec<Option<f64>> = self.samples.iter().map(|s| s.map(|p| p.y)).collect();
        fill_gaps(&ys).ok_or(Error::EmptyTrack)
    }
}

/// Linear gap filling; `None` when there is no valid sample at all.
pub(crate) fn fill_gaps(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let first = values.iter().position(Option::is_some)?;
    let mut out = vec![0.0; values.len()];
    let mut prev: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            match prev {
                Some((pi, pv)) if i > pi + 1 => {
                    for (k, slot) in out.iter_mut().enumerate().take(i).skip(pi + 1) {
                        let t = (k - pi) as f64 / (i - pi) as f64;
                        *slot = pv + t * (v - pv);
                    }
                }
                None => {
                    for slot in out.iter_mut().take(i) {
                        *slot = v;
                    }
                }
                _ => {}
            }
            out[i] = v;
            prev = Some((i, v));
        }
    }
    let (last_i, last_v) = prev.expect("at least one valid sample");
    for slot in out.iter_mut().skip(last_i + 1) {
        *slot = last_v;
    }
    debug_assert!(first <= last_i);
    Some(out)
}

/// Centred moving average; the window shrinks symmetrically at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            let s: f64 = values[i - r..=i + r].iter().sum();
            s / (2 * r + 1) as f64
        })
        .collect()
}

/// Candidate maxima of `y`: interior strict peaks (plateaus resolved to
/// their midpoint) plus endpoint peaks.
fn peak_candidates(y: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let n = y.len();
    let mut interior = Vec::new();
    let mut edges = Vec::new();
    // Leading edge, possibly a plateau.
    let mut j = 0;
    while j + 1 < n && y[j + 1] == y[0] {
        j += 1;
    }
    if j + 1 < n && y[j + 1] < y[0] {
        edges.push(j / 2);
    }
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut k = i;
            while k + 1 < n && y[k + 1] == y[i] {
                k += 1;
            }
            if k + 1 < n && y[k + 1] < y[i] {
                interior.push((i + k) / 2);
            } else if k + 1 == n {
                // Rising into the last sample(s): an endpoint peak.
                edges.push((i + k) / 2);
            }
            i = k + 1;
        } else {
            i += 1;
        }
    }
    if n >= 2 && y[n - 1] > y[n - 2] && !edges.contains(&(n - 1)) {
        edges.push(n - 1);
    }
    (interior, edges)
}

/// Prominence of a maximum. For endpoint peaks only the existing side is
/// considered.
fn prominence(y: &[f64], p: usize) -> f64 {
    let side_min = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut lowest: Option<f64> = None;
        for i in range {
            if y[i] > y[p] {
                break;
            }
            lowest = Some(lowest.map_or(y[i], |m: f64| m.min(y[i])));
        }
        lowest
    };
    let left = side_min(&mut (0..p).rev());
    let right = side_min(&mut (p + 1..y.len()));
    let base = match (left, right) {
        (Some(l), Some(r)) => l.max(r),
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => y[p],
    };
    y[p] - base
}

/// Frames where the body is lowest: local maxima of image y after
/// smoothing, at least `min_separation` apart and with prominence of at
/// least `min_prominence` pixels.
///
/// Endpoint extrema count only when the track also has an interior one, so
/// a monotone track yields no minima.
pub fn find_minima(
    track: &CentroidTrack,
    smooth_window: usize,
    min_separation: usize,
    min_prominence: f64,
) -> Result<Vec<usize>> {
    if track.len() < 3 {
        return Err(Error::TrackTooShort {
            len: track.len(),
            min: 3,
        });
    }
    let raw = track.interpolated_y()?;
    let y = moving_average(&raw, smooth_window);
    let (interior, edges) = peak_candidates(&y);
    if interior.is_empty() {
        return Ok(Vec::new());
    }
    let mut peaks: Vec<usize> = interior.into_iter().chain(edges).collect();
    peaks.sort_unstable();

    // Separation: visit peaks from the deepest, suppressing close neighbours.
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| y[peaks[b]].total_cmp(&y[peaks[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &k in &order {
        if !keep[k] {
            continue;
        }
        for (j, kept) in keep.iter_mut().enumerate() {
            if j != k && peaks[j].abs_diff(peaks[k]) < min_separation {
                *kept = false;
            }
        }
    }
    // Smoothing drags a peak towards the shallower side of an asymmetric
    // contact; snap back to the raw extremum within the window.
    let half = smooth_window.max(1) / 2;
    let mut out: Vec<usize> = peaks
        .into_iter()
        .zip(keep)
        .filter(|&(p, k)| k && prominence(&y, p) >= min_prominence)
        .map(|(p, _)| snap_to_raw(&raw, p, half))
        .collect();
    out.dedup();
    Ok(out)
}

/// Index of the largest raw value within `radius` of `p`; ties go to the
/// sample closest to `p`, then the earlier one.
fn snap_to_raw(raw: &[f64], p: usize, radius: usize) -> usize {
    let lo = p.saturating_sub(radius);
    let hi = (p + radius).min(raw.len() - 1);
    (lo..=hi)
        .max_by(|&a, &b| {
            raw[a]
                .total_cmp(&raw[b])
                .then(b.abs_diff(p).cmp(&a.abs_diff(p)))
                .then(b.cmp(&a))
        })
        .unwrap_or(p)
}

/// Default prominence threshold for a track: a fraction of its smoothed
/// amplitude.
pub fn default_prominence(track: &CentroidTrack, params: &SegmentationParams) -> Result<f64> {
    let y = moving_average(&track.interpolated_y()?, params.smooth_window);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((hi - lo) * params.min_prominence_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BounceSegment {
    pub start: usize,
    pub end: usize,
    pub apex: usize,
    /// Pixels above the trampoline line (or the track's lowest point).
    pub apex_height: f64,
    pub is_routine_jump: bool,
    /// First and last airborne frame, once contact flags are known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub airborne: Option<(usize, usize)>,
}

/// Turns consecutive minima into bounces and flags the ones high enough to
/// belong to the routine proper.
pub fn segment_routine(
    track: &CentroidTrack,
    minima: &[usize],
    apex_threshold: f64,
) -> Result<Vec<BounceSegment>> {
    if minima.len() < 2 {
        return Err(Error::SegmentationFailed(minima.len()));
    }
    debug_assert!(
        minima.windows(2).all(|w| w[0] < w[1]),
        "minima must be sorted"
    );
    let y = track.interpolated_y()?;
    let baseline = track
        .trampoline_row
        .unwrap_or_else(|| y.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let mut segments: Vec<BounceSegment> = minima
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let apex = (start + 1..=end)
                .min_by(|&a, &b| y[a].total_cmp(&y[b]))
                .expect("non-empty range");
            BounceSegment {
                start,
                end,
                apex,
                apex_height: (baseline - y[apex]).max(0.0),
                is_routine_jump: false,
                airborne: None,
            }
        })
        .collect();
    let highest = segments.iter().map(|s| s.apex_height).fold(0.0, f64::max);
    for s in &mut segments {
        s.is_routine_jump = s.apex_height >= apex_threshold * highest;
    }
    Ok(segments)
}

/// Full segmentation with default-style parameters.
pub fn segment_track(
    track: &CentroidTrack,
    params: &SegmentationParams,
) -> Result<Vec<BounceSegment>> {
    let prominence = default_prominence(track, params)?;
    let minima = find_minima(
        track,
        params.smooth_window,
        params.min_separation,
        prominence,
    )?;
    segment_routine(track, &minima, params.apex_threshold)
}

/// The longest run of non-contact frames inside the segment (earliest on
/// ties).
pub fn airborne_range(segment: &BounceSegment, contact: &[bool]) -> Result<(usize, usize)> {
    let end = segment.end.min(contact.len().saturating_sub(1));
    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for (i, &touching) in contact.iter().enumerate().take(end + 1).skip(segment.start) {
        if !touching {
            let s = *run_start.get_or_insert(i);
            if best.is_none_or(|(bs, be)| i - s > be - bs) {
                best = Some((s, i));
            }
        } else {
            run_start = None;
        }
    }
    best.ok_or(Error::NoAirbornePhase {
        start: segment.start,
        end: segment.end,
    })
}

/// Fills in `airborne` for every segment that has one.
pub fn attach_airborne(segments: &mut [BounceSegment], contact: &[bool]) {
    for s in segments {
        s.airborne = airborne_range(s, contact).ok();
    }
}

/// Segments document exchanged with the service and UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentsDocument {
    pub routine_id: String,
    pub segments: Vec<BounceSegment>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(ys: &[f64]) -> CentroidTrack {
        CentroidTrack::new(ys.iter().map(|&y| Some(Point::new(0.0, y))).collect(), 30.0)
    }

    #[test]
    fn sinusoid_minima() {
        let ys: Vec<f64> = (0..=300)
            .map(|t| 250.0 - 200.0 * (std::f64::consts::PI * t as f64 / 30.0).sin().abs())
            .collect();
        let m = find_minima(&track(&ys), 5, 10, 10.0).unwrap();
        let expected: Vec<usize> = (0..=10).map(|k| 30 * k).collect();
        assert_eq!(m.len(), expected.len(), "{m:?}");
        for (got, want) in m.iter().zip(&expected) {
            assert!(got.abs_diff(*want) <= 1, "{got} vs {want}");
        }
    }

    #[test]
    fn monotone_track_has_no_minima() {
        let ys: Vec<f64> = (0..100).map(|t| t as f64).collect();
        assert!(find_minima(&track(&ys), 5, 10, 1.0).unwrap().is_empty());
        let down: Vec<f64> = (0..100).map(|t| -(t as f64)).collect();
        assert!(find_minima(&track(&down), 5, 10, 1.0).unwrap().is_empty());
    }

    #[test]
    fn separation_keeps_the_deeper_minimum() {
        let mut ys = vec![100.0; 40];
        ys[15] = 150.0;
        ys[18] = 160.0;
        let m = find_minima(&track(&ys), 1, 10, 5.0).unwrap();
        assert_eq!(m, vec![18]);
    }

    #[test]
    fn plateau_resolves_to_midpoint() {
        let mut ys = vec![0.0; 30];
        for y in ys.iter_mut().take(16).skip(10) {
            *y = 50.0;
        }
        assert_eq!(find_minima(&track(&ys), 1, 5, 1.0).unwrap(), vec![12]);
    }

    #[test]
    fn short_track_is_rejected() {
        assert!(matches!(
            find_minima(&track(&[1.0, 2.0]), 5, 10, 1.0),
            Err(Error::TrackTooShort { len: 2, .. })
        ));
    }

    #[test]
    fn gaps_are_interpolated() {
        let mut t = track(&[10.0, 0.0, 0.0, 40.0, 0.0]);
        t.samples[1] = None;
        t.samples[2] = None;
        t.samples[4] = None;
        assert_eq!(
            t.interpolated_y().unwrap(),
            vec![10.0, 20.0, 30.0, 40.0, 40.0]
        );
        let empty = CentroidTrack::new(vec![None; 4], 30.0);
        assert!(empty.interpolated_y().is_err());
    }

    /// Track of bounces with the given apex heights (pixels above row 400),
    /// period 40 frames, minima at multiples of 40.
    fn bounce_track(apexes: &[f64]) -> (CentroidTrack, Vec<usize>) {
        let mut ys = Vec::new();
        for &a in apexes {
            for t in 0..40 {
                let s = t as f64 / 40.0;
                ys.push(400.0 - 4.0 * a * s * (1.0 - s));
            }
        }
        ys.push(400.0);
        let minima = (0..=apexes.len()).map(|k| 40 * k).collect();
        (track(&ys).with_trampoline_row(400.0), minima)
    }

    #[test]
    fn low_bounces_are_not_routine_jumps() {
        let mut apexes = vec![90.0; 3];
        apexes.extend(vec![300.0; 9]);
        let (t, minima) = bounce_track(&apexes);
        let segs = segment_routine(&t, &minima, 0.5).unwrap();
        assert_eq!(segs.len(), 12);
        for (i, s) in segs.iter().enumerate() {
            assert_eq!(s.is_routine_jump, i >= 3, "segment {i}");
            assert!(s.start < s.apex && s.apex <= s.end);
            assert_eq!(s.apex, s.start + 20);
        }
        assert_eq!(segs[5].apex_height, 300.0);
    }

    #[test]
    fn equal_apexes_all_flagged() {
        let (t, minima) = bounce_track(&[200.0; 5]);
        for thr in [0.0, 0.3, 1.0] {
            let segs = segment_routine(&t, &minima, thr).unwrap();
            assert!(segs.iter().all(|s| s.is_routine_jump));
        }
    }

    #[test]
    fn one_minimum_fails() {
        let (t, _) = bounce_track(&[200.0; 2]);
        assert!(matches!(
            segment_routine(&t, &[40], 0.5),
            Err(Error::SegmentationFailed(1))
        ));
    }

    #[test]
    fn full_segmentation_recovers_bounces() {
        let mut apexes = vec![90.0; 3];
        apexes.extend(vec![300.0; 10]);
        apexes.push(80.0);
        let (t, truth) = bounce_track(&apexes);
        let segs = segment_track(&t, &SegmentationParams::default()).unwrap();
        assert_eq!(segs.len(), 14);
        for (s, w) in segs.iter().zip(truth.windows(2)) {
            assert!(
                s.start.abs_diff(w[0]) <= 1 && s.end.abs_diff(w[1]) <= 1,
                "{s:?} vs {w:?}"
            );
        }
        let flags: Vec<bool> = segs.iter().map(|s| s.is_routine_jump).collect();
        assert_eq!(flags.iter().filter(|&&f| f).count(), 10);
        assert!(!flags[0] && !flags[2] && flags[3] && !flags[13]);
    }

    fn seg(start: usize, end: usize) -> BounceSegment {
        BounceSegment {
            start,
            end,
            apex: start + 1,
            apex_height: 1.0,
            is_routine_jump: true,
            airborne: None,
        }
    }

    #[test]
    fn airborne_cases() {
        let mut contact = vec![false; 40];
        for c in contact.iter_mut().take(4) {
            *c = true;
        }
        for c in contact.iter_mut().skip(36) {
            *c = true;
        }
        assert_eq!(airborne_range(&seg(0, 39), &contact).unwrap(), (4, 35));
        assert_eq!(airborne_range(&seg(0, 39), &[false; 40]).unwrap(), (0, 39));
        assert!(airborne_range(&seg(0, 9), &[true; 10]).is_err());

        let alternating = [
            true, false, true, false, false, false, true, false, false, true,
        ];
        assert_eq!(airborne_range(&seg(0, 9), &alternating).unwrap(), (3, 5));
    }
}
