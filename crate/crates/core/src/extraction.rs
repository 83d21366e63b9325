//! Per-frame athlete extraction.
//!
//! A running-average background model yields a foreground mask per frame.
//! The mask is cleaned with a 2x2 erosion and repeated dilation, the largest
//! segment is taken as the athlete, and its moments, hull and bounding box
//! drive contact detection and cropping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    bounding_box, centroid, convex_hull, dilate, erode, label_components, largest_component,
    BinaryMask, Frame, Point, Polygon, Rect,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionParams {
    /// Running-average learning rate, in (0, 1].
    pub learning_rate: f32,
    /// Foreground threshold on the per-channel absolute difference (0-255).
    pub threshold: f32,
    pub kernel: usize,
    pub erode_iterations: usize,
    pub dilate_iterations: usize,
    pub hue_lo: f32,
    pub hue_hi: f32,
    pub saturation_floor: f32,
    /// Fraction of a row that must be bed-coloured for it to count.
    pub row_coverage: f32,
    pub contact_margin: f64,
    pub blur_radius: usize,
    pub darken: f32,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            learning_rate: 0.01,
            threshold: 25.0,
            kernel: 2,
            erode_iterations: 1,
            dilate_iterations: 10,
            hue_lo: 170.0,
            hue_hi: 260.0,
            saturation_floor: 0.25,
            row_coverage: 0.30,
            contact_margin: 5.0,
            blur_radius: 7,
            darken: 0.4,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.kernel == 0 {
            return Err(Error::InvalidConfig("kernel must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.row_coverage) {
            return Err(Error::InvalidConfig(
                "row_coverage must be in [0, 1]".into(),
            ));
        }
        if self.darken < 0.0 {
            return Err(Error::InvalidConfig("darken must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-pixel exponential running average of colour.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    mean: Vec<f32>,
    learning_rate: f32,
    frames_seen: usize,
}

impl BackgroundModel {
    pub fn new(learning_rate: f32) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be in (0, 1], got {learning_rate}"
            )));
        }
        Ok(BackgroundModel {
            width: 0,
            height: 0,
            mean: Vec::new(),
            learning_rate,
            frames_seen: 0,
        })
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    /// Folds a frame into the model. The first frame initialises the mean.
    pub fn update(&mut self, frame: &Frame) -> Result<()> {
        if self.frames_seen == 0 {
            self.width = frame.width();
            self.height = frame.height();
            self.mean = frame.pixels().iter().map(|&p| f32::from(p)).collect();
            self.frames_seen = 1;
            return Ok(());
        }
        self.check_dims(frame)?;
        let a = self.learning_rate;
        let keep = 1.0 - a;
        for (m, &p) in self.mean.iter_mut().zip(frame.pixels()) {
            *m = keep * *m + a * f32::from(p);
        }
        self.frames_seen += 1;
        Ok(())
    }

    /// Like [`update`](Self::update), but pixels inside `exclude` keep
    /// their current mean so the athlete never bleeds into the model.
    pub fn update_excluding(&mut self, frame: &Frame, exclude: Option<&Silhouette>) -> Result<()> {
        let Some(sil) = exclude.filter(|_| self.frames_seen > 0) else {
            return self.update(frame);
        };
        self.check_dims(frame)?;
        let a = self.learning_rate;
        let keep = 1.0 - a;
        let px = frame.pixels();
        for y in 0..self.height {
            for x in 0..self.width {
                if sil.contains(x, y) {
                    continue;
                }
                let j = (y * self.width + x) * 3;
                for (m, &p) in self.mean[j..j + 3].iter_mut().zip(&px[j..j + 3]) {
                    *m = keep * *m + a * f32::from(p);
                }
            }
        }
        self.frames_seen += 1;
        Ok(())
    }

    fn check_dims(&self, frame: &Frame) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                actual_w: frame.width(),
                actual_h: frame.height(),
            });
        }
        Ok(())
    }

    /// The current mean rendered as an 8-bit frame.
    pub fn to_frame(&self) -> Result<Frame> {
        if self.frames_seen == 0 {
            return Err(Error::UninitialisedModel);
        }
        let px = self
            .mean
            .iter()
            .map(|&m| m.round().clamp(0.0, 255.0) as u8)
            .collect();
        Frame::new(self.width, self.height, 0, px)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSource {
    Detected,
    UserAdjusted,
}

/// Image row of the top of the trampoline bed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrampolineLine {
    pub top_row: usize,
    pub source: LineSource,
}

impl TrampolineLine {
    /// A manually placed line, checked against the frame height.
    pub fn user_adjusted(top_row: usize, frame_height: usize) -> Result<Self> {
        if top_row >= frame_height {
            return Err(Error::InvalidConfig(format!(
                "trampoline line {top_row} outside frame of height {frame_height}"
            )));
        }
        Ok(TrampolineLine {
            top_row,
            source: LineSource::UserAdjusted,
        })
    }
}

/// Foreground pixels: any channel differs from the background mean by more
/// than `threshold`. Rows at or below the trampoline line are cleared.
pub fn foreground_mask(
    model: &BackgroundModel,
    frame: &Frame,
    threshold: f32,
    line: Option<&TrampolineLine>,
) -> Result<BinaryMask> {
    if model.frames_seen == 0 {
        return Err(Error::UninitialisedModel);
    }
    model.check_dims(frame)?;
    let (w, h) = (frame.width(), frame.height());
    let rows = line.map_or(h, |l| l.top_row.min(h));
    let mut bits = vec![false; w * h];
    let px = frame.pixels();
    for (i, bit) in bits[..rows * w].iter_mut().enumerate() {
        let j = i * 3;
        let d0 = (f32::from(px[j]) - model.mean[j]).abs();
        let d1 = (f32::from(px[j + 1]) - model.mean[j + 1]).abs();
        let d2 = (f32::from(px[j + 2]) - model.mean[j + 2]).abs();
        *bit = d0.max(d1).max(d2) > threshold;
    }
    BinaryMask::from_bits(w, h, bits)
}

/// The athlete's silhouette in one frame.
///
/// `mask` covers only the bounding box; `mask_origin` is its top-left
/// corner in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub mask: BinaryMask,
    pub mask_origin: (usize, usize),
    pub centroid: Point,
    pub hull: Polygon,
    pub bbox: Rect,
}

impl Silhouette {
    /// Whether frame pixel `(x, y)` belongs to the silhouette.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (ox, oy) = self.mask_origin;
        x >= ox
            && y >= oy
            && x - ox < self.mask.width()
            && y - oy < self.mask.height()
            && self.mask.get(x - ox, y - oy)
    }

    pub fn area(&self) -> usize {
        self.mask.count()
    }
}

/// Cleans a foreground mask and keeps the largest segment.
///
/// The erode/dilate pass decides which blob is the athlete; the silhouette
/// itself is the raw foreground components touching that blob, so the
/// anchored kernel does not shift the centroid or trim an edge. Returns `None` (no subject)
/// when nothing survives.
pub fn extract_silhouette(mask: &BinaryMask, params: &ExtractionParams) -> Option<Silhouette> {
    // Everything happens inside the foreground's bounds, widened up and to
    // the left by how far the anchored dilation can spread.
    let (x0, y0, x1, y1) = foreground_bounds(mask)?;
    let reach = (params.kernel - 1) * params.dilate_iterations;
    let (cx, cy) = (x0.saturating_sub(reach), y0.saturating_sub(reach));
    let sub = BinaryMask::from_fn(x1 + 1 - cx, y1 + 1 - cy, |x, y| mask.get(cx + x, cy + y));
    let mut sil = silhouette_in(&sub, params)?;
    let (dx, dy) = (cx as f64, cy as f64);
    sil.mask_origin = (sil.mask_origin.0 + cx, sil.mask_origin.1 + cy);
    sil.centroid = Point::new(sil.centroid.x + dx, sil.centroid.y + dy);
    for p in &mut sil.hull {
        *p = Point::new(p.x + dx, p.y + dy);
    }
    sil.bbox = Rect {
        x_min: sil.bbox.x_min + dx,
        y_min: sil.bbox.y_min + dy,
        x_max: sil.bbox.x_max + dx,
        y_max: sil.bbox.y_max + dy,
    };
    Some(sil)
}

/// Inclusive pixel bounds of the set pixels.
fn foreground_bounds(mask: &BinaryMask) -> Option<(usize, usize, usize, usize)> {
    let w = mask.width();
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (y, row) in mask.bits().chunks(w).enumerate() {
        let Some(first) = row.iter().position(|&b| b) else {
            continue;
        };
        let last = row.iter().rposition(|&b| b).unwrap_or(first);
        bounds = Some(match bounds {
            None => (first, y, last, y),
            Some((a, b, c, _)) => (a.min(first), b, c.max(last), y),
        });
    }
    bounds
}

fn silhouette_in(mask: &BinaryMask, params: &ExtractionParams) -> Option<Silhouette> {
    let k = params.kernel;
    let opened = dilate(
        &erode(mask, k, k, params.erode_iterations),
        k,
        k,
        params.dilate_iterations,
    );
    let segment = largest_component(&opened);
    if segment.is_empty() {
        return None;
    }
    let (labels, sizes) = label_components(mask);
    let mut keep = vec![false; sizes.len() + 1];
    for (i, &on) in segment.bits().iter().enumerate() {
        if on && labels[i] != 0 {
            keep[labels[i] as usize] = true;
        }
    }
    let athlete = BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        keep[labels[y * mask.width() + x] as usize]
    });
    if athlete.is_empty() {
        return None;
    }
    let c = centroid(&athlete).ok()?;
    let hull = convex_hull(&athlete).ok()?;
    let bbox = bounding_box(&hull).ok()?;
    let (x0, y0) = (bbox.x_min as usize, bbox.y_min as usize);
    let (pw, ph) = (bbox.width() as usize + 1, bbox.height() as usize + 1);
    let patch = BinaryMask::from_fn(pw, ph, |x, y| athlete.get(x0 + x, y0 + y));
    Some(Silhouette {
        mask: patch,
        mask_origin: (x0, y0),
        centroid: c,
        hull,
        bbox,
    })
}

fn hue_saturation(rgb: [u8; 3]) -> (f32, f32) {
    let r = f32::from(rgb[0]) / 255.0;
    let g = f32::from(rgb[1]) / 255.0;
    let b = f32::from(rgb[2]) / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta <= f32::EPSILON {
        return (0.0, 0.0);
    }
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    let hue = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (hue, sat)
}

/// Best guess for the bed line: the topmost row where at least
/// `row_coverage` of the pixels have a hue in `[hue_lo, hue_hi]` and
/// saturation above the floor.
pub fn detect_trampoline(
    frame: &Frame,
    hue_lo: f32,
    hue_hi: f32,
    saturation_floor: f32,
    row_coverage: f32,
) -> Result<TrampolineLine> {
    let w = frame.width();
    let needed = (row_coverage * w as f32).ceil().max(1.0) as usize;
    for y in 0..frame.height() {
        let hits = (0..w)
            .filter(|&x| {
                let (hue, sat) = hue_saturation(frame.get(x, y));
                sat > saturation_floor && hue >= hue_lo && hue <= hue_hi
            })
            .count();
        if hits >= needed {
            return Ok(TrampolineLine {
                top_row: y,
                source: LineSource::Detected,
            });
        }
    }
    Err(Error::TrampolineNotFound)
}

/// True when the bottom of the bounding box reaches the bed line, less a
/// margin.
pub fn contact_detect(bbox: &Rect, line: &TrampolineLine, margin: f64) -> bool {
    bbox.y_max >= line.top_row as f64 - margin
}

/// A square athlete image and where it sits in the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AthleteCrop {
    pub image: Frame,
    /// Frame coordinates of the crop's top-left pixel; may be negative or
    /// extend past the frame, in which case edge pixels are replicated.
    pub origin: (i64, i64),
}

/// Crops a `side` x `side` square centred on the centroid and suppresses
/// the background: non-silhouette pixels are box-blurred with the given
/// radius and scaled by `darken`.
pub fn prepare_crop(
    frame: &Frame,
    silhouette: &Silhouette,
    side: usize,
    blur_radius: usize,
    darken: f32,
) -> AthleteCrop {
    assert!(side > 0, "crop side must be positive");
    // Crop pixel (side / 2, side / 2) lands on the rounded centroid.
    let ox = silhouette.centroid.x.round() as i64 - (side / 2) as i64;
    let oy = silhouette.centroid.y.round() as i64 - (side / 2) as i64;
    let (fw, fh) = (frame.width() as i64, frame.height() as i64);
    let mut px = Vec::with_capacity(side * side * 3);
    let mut fg = Vec::with_capacity(side * side);
    for y in 0..side as i64 {
        let sy = (oy + y).clamp(0, fh - 1);
        for x in 0..side as i64 {
            let sx = (ox + x).clamp(0, fw - 1);
            px.extend_from_slice(&frame.get(sx as usize, sy as usize));
            let inside = ox + x >= 0 && oy + y >= 0 && ox + x < fw && oy + y < fh;
            fg.push(inside && silhouette.contains((ox + x) as usize, (oy + y) as usize));
        }
    }
    let blurred = box_blur(&px, side, side, blur_radius);
    let mut out = px.clone();
    for i in 0..side * side {
        if fg[i] {
            continue;
        }
        for c in 0..3 {
            let v = f32::from(blurred[i * 3 + c]) * darken;
            out[i * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    AthleteCrop {
        image: Frame::new(side, side, frame.index, out).expect("crop buffer sized to side"),
        origin: (ox, oy),
    }
}

/// Mean over a (2r+1)^2 window truncated at the image border.
fn box_blur(px: &[u8], w: usize, h: usize, radius: usize) -> Vec<u8> {
    if radius == 0 {
        return px.to_vec();
    }
    // Summed-area table with a zero row and column.
    let stride = w + 1;
    let mut sat = vec![[0u32; 3]; stride * (h + 1)];
    for y in 0..h {
        let mut row = [0u32; 3];
        for x in 0..w {
            for c in 0..3 {
                row[c] += u32::from(px[(y * w + x) * 3 + c]);
                sat[(y + 1) * stride + x + 1][c] = sat[y * stride + x + 1][c] + row[c];
            }
        }
    }
    let mut out = vec![0u8; px.len()];
    for y in 0..h {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius + 1).min(w);
            let n = ((y1 - y0) * (x1 - x0)) as u32;
            for c in 0..3 {
                let s = sat[y1 * stride + x1][c] + sat[y0 * stride + x0][c]
                    - sat[y0 * stride + x1][c]
                    - sat[y1 * stride + x0][c];
                out[(y * w + x) * 3 + c] = ((s + n / 2) / n) as u8;
            }
        }
    }
    out
}

/// Largest bounding-box side over the routine.
pub fn max_bbox_side(silhouettes: &[&Silhouette]) -> Option<f64> {
    silhouettes
        .iter()
        .map(|s| s.bbox.width().max(s.bbox.height()))
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ExtractionParams {
        ExtractionParams::default()
    }

    #[test]
    fn background_initialises_and_averages() {
        let mut m = BackgroundModel::new(0.5).unwrap();
        let f0 = Frame::filled(4, 3, 0, [0, 0, 0]);
        m.update(&f0).unwrap();
        assert!(m.mean().iter().all(|&v| v == 0.0));
        m.update(&Frame::filled(4, 3, 1, [255, 255, 255])).unwrap();
        assert!(m.mean().iter().all(|&v| v == 127.5));
        assert!(matches!(
            m.update(&Frame::filled(5, 3, 2, [0, 0, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(BackgroundModel::new(0.0).is_err());
        assert!(BackgroundModel::new(1.5).is_err());
    }

    #[test]
    fn excluded_pixels_keep_their_mean() {
        let mut m = BackgroundModel::new(0.5).unwrap();
        let black = Frame::filled(4, 4, 0, [0, 0, 0]);
        // before initialisation the exclusion is ignored
        let sil = Silhouette {
            mask: BinaryMask::from_fn(2, 2, |x, _| x == 0),
            mask_origin: (1, 1),
            centroid: Point::new(1.0, 1.5),
            hull: vec![Point::new(1.0, 1.0), Point::new(1.0, 2.0)],
            bbox: Rect {
                x_min: 1.0,
                y_min: 1.0,
                x_max: 1.0,
                y_max: 2.0,
            },
        };
        m.update_excluding(&black, Some(&sil)).unwrap();
        let white = Frame::filled(4, 4, 1, [255, 255, 255]);
        m.update_excluding(&white, Some(&sil)).unwrap();
        let bg = m.mean();
        for y in 0..4 {
            for x in 0..4 {
                let want = if sil.contains(x, y) { 0.0 } else { 127.5 };
                assert_eq!(bg[(y * 4 + x) * 3], want, "({x}, {y})");
            }
        }
        assert!(sil.contains(1, 2) && !sil.contains(2, 1));
        m.update_excluding(&white, None).unwrap();
        assert_eq!(m.mean()[(4 + 1) * 3], 127.5);
    }

    #[test]
    fn constant_video_is_a_fixed_point() {
        let mut m = BackgroundModel::new(0.01).unwrap();
        for t in 0..50 {
            m.update(&Frame::filled(6, 6, t, [40, 90, 200])).unwrap();
        }
        let f = m.to_frame().unwrap();
        assert_eq!(f.get(3, 3), [40, 90, 200]);
    }

    #[test]
    fn mask_requires_initialised_model() {
        let m = BackgroundModel::new(0.1).unwrap();
        let f = Frame::filled(3, 3, 0, [0, 0, 0]);
        assert!(matches!(
            foreground_mask(&m, &f, 25.0, None),
            Err(Error::UninitialisedModel)
        ));
    }

    fn patch_frame(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> Frame {
        let mut f = Frame::filled(w, h, 1, [60, 60, 60]);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                f.set(x, y, [230, 200, 180]);
            }
        }
        f
    }

    #[test]
    fn bright_patch_is_recovered_exactly() {
        let bg = Frame::filled(64, 48, 0, [60, 60, 60]);
        let mut m = BackgroundModel::new(0.01).unwrap();
        m.update(&bg).unwrap();
        assert!(foreground_mask(&m, &bg, 25.0, None).unwrap().is_empty());
        let f = patch_frame(64, 48, 10, 5, 20);
        let line = TrampolineLine::user_adjusted(40, 48).unwrap();
        let mask = foreground_mask(&m, &f, 25.0, Some(&line)).unwrap();
        let expected =
            BinaryMask::from_fn(64, 48, |x, y| (10..30).contains(&x) && (5..25).contains(&y));
        assert_eq!(mask, expected);

        let below = patch_frame(64, 48, 10, 41, 5);
        assert!(foreground_mask(&m, &below, 25.0, Some(&line))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn silhouette_of_clean_blob_has_true_centroid() {
        // Ellipse centred at (40.0, 30.0).
        let mask = BinaryMask::from_fn(80, 64, |x, y| {
            let dx = (x as f64 - 40.0) / 9.0;
            let dy = (y as f64 - 30.0) / 20.0;
            dx * dx + dy * dy <= 1.0
        });
        let s = extract_silhouette(&mask, &params()).unwrap();
        assert!(s.centroid.distance(Point::new(40.0, 30.0)) < 1.0);
        assert!(s.bbox.contains(s.centroid));
        assert_eq!(s.area(), mask.count());
    }

    #[test]
    fn isolated_pixels_give_no_subject() {
        let mask = BinaryMask::from_fn(30, 30, |x, y| x % 3 == 0 && y % 3 == 0);
        assert!(extract_silhouette(&mask, &params()).is_none());
        assert!(extract_silhouette(&BinaryMask::new(8, 8), &params()).is_none());
    }

    #[test]
    fn larger_person_wins() {
        // 20x25 = 500 and 50x60 = 3000 pixels, far apart.
        let mask = BinaryMask::from_fn(200, 100, |x, y| {
            ((5..25).contains(&x) && (5..30).contains(&y))
                || ((100..150).contains(&x) && (20..80).contains(&y))
        });
        let s = extract_silhouette(&mask, &params()).unwrap();
        assert_eq!(s.area(), 3000);
        assert!(s.bbox.x_min >= 100.0);
    }

    #[test]
    fn detects_band_top() {
        let mut f = Frame::filled(100, 500, 0, [120, 110, 100]);
        for y in 300..=400 {
            for x in 0..100 {
                f.set(x, y, [30, 60, 200]);
            }
        }
        let line = detect_trampoline(&f, 170.0, 260.0, 0.25, 0.3).unwrap();
        assert_eq!(line.top_row, 300);
        assert_eq!(line.source, LineSource::Detected);
        let plain = Frame::filled(50, 50, 0, [200, 40, 40]);
        assert!(matches!(
            detect_trampoline(&plain, 170.0, 260.0, 0.25, 0.3),
            Err(Error::TrampolineNotFound)
        ));
        let manual = TrampolineLine::user_adjusted(412, 504).unwrap();
        assert_eq!(
            (manual.top_row, manual.source),
            (412, LineSource::UserAdjusted)
        );
        assert!(TrampolineLine::user_adjusted(504, 504).is_err());
    }

    fn rect_bottom(bottom: f64) -> Rect {
        Rect {
            x_min: 0.0,
            y_min: bottom - 50.0,
            x_max: 10.0,
            y_max: bottom,
        }
    }

    #[test]
    fn contact_rules() {
        let line = TrampolineLine {
            top_row: 490,
            source: LineSource::Detected,
        };
        assert!(contact_detect(&rect_bottom(500.0), &line, 0.0));
        assert!(!contact_detect(&rect_bottom(100.0), &line, 0.0));
        assert!(contact_detect(&rect_bottom(488.0), &line, 3.0));
        assert!(!contact_detect(&rect_bottom(488.0), &line, 0.0));
    }

    fn blob_silhouette(
        frame_w: usize,
        frame_h: usize,
        cx: usize,
        cy: usize,
        r: usize,
    ) -> Silhouette {
        let mask = BinaryMask::from_fn(frame_w, frame_h, |x, y| {
            x.abs_diff(cx) <= r && y.abs_diff(cy) <= r
        });
        extract_silhouette(&mask, &params()).unwrap()
    }

    #[test]
    fn crop_is_centred_and_keeps_foreground() {
        let mut f = Frame::filled(200, 160, 3, [10, 20, 30]);
        for y in 0..160 {
            for x in 0..200 {
                f.set(
                    x,
                    y,
                    [(x % 256) as u8, (y % 256) as u8, ((x * y) % 251) as u8],
                );
            }
        }
        let s = blob_silhouette(200, 160, 100, 80, 6);
        let crop = prepare_crop(&f, &s, 100, 7, 0.4);
        assert_eq!((crop.image.width(), crop.image.height()), (100, 100));
        assert_eq!(crop.origin, (50, 30));
        assert_eq!(crop.image.get(50, 50), f.get(100, 80));

        let same = prepare_crop(&f, &s, 100, 0, 1.0);
        for y in 0..100 {
            for x in 0..100 {
                assert_eq!(same.image.get(x, y), f.get(50 + x, 30 + y));
            }
        }
    }

    #[test]
    fn crop_replicates_edges_and_has_exact_size() {
        let f = Frame::filled(40, 30, 0, [100, 100, 100]);
        let s = blob_silhouette(40, 30, 3, 3, 2);
        for side in [1, 2, 7, 64] {
            let c = prepare_crop(&f, &s, side, 3, 0.5);
            assert_eq!((c.image.width(), c.image.height()), (side, side));
        }
    }

    #[test]
    fn max_side_scans_all() {
        let a = blob_silhouette(300, 300, 50, 50, 20);
        let b = blob_silhouette(300, 300, 150, 150, 45);
        let c = blob_silhouette(300, 300, 220, 220, 32);
        assert_eq!(max_bbox_side(&[&a, &b, &c]), Some(90.0));
        assert_eq!(max_bbox_side(&[&a]), Some(40.0));
        assert_eq!(max_bbox_side(&[]), None);
    }

    proptest::proptest! {
        #[test]
        fn cropping_does_not_change_the_silhouette(
            blobs in proptest::collection::vec((0usize..90, 0usize..70, 1usize..25, 1usize..25), 0..5),
            dilate_iterations in 0usize..12,
        ) {
            let mask = BinaryMask::from_fn(96, 72, |x, y| {
                blobs.iter().any(|&(bx, by, w, h)| (bx..bx + w).contains(&x) && (by..by + h).contains(&y))
            });
            let params = ExtractionParams { dilate_iterations, ..params() };
            let cropped = extract_silhouette(&mask, &params);
            let full = silhouette_in(&mask, &params);
            proptest::prop_assert_eq!(cropped.is_some(), full.is_some());
            if let (Some(a), Some(b)) = (cropped, full) {
                proptest::prop_assert_eq!(&a.mask, &b.mask);
                proptest::prop_assert_eq!(a.mask_origin, b.mask_origin);
                proptest::prop_assert_eq!(&a.hull, &b.hull);
                proptest::prop_assert_eq!(a.bbox, b.bbox);
                proptest::prop_assert!((a.centroid.x - b.centroid.x).abs() < 1e-9);
                proptest::prop_assert!((a.centroid.y - b.centroid.y).abs() < 1e-9);
            }
        }
    }
}
