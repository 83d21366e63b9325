//! Raster and binary-mask primitives used by body extraction.
//!
//! Morphology uses a rectangular structuring element anchored at its
//! top-left cell: the neighbourhood of `(x, y)` is `x..x+kw`, `y..y+kh`.
//! Pixels outside the image count as background for both erosion and
//! dilation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB frame, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pub index: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, index: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero-sized frame {width}x{height}"
            )));
        }
        if pixels.len() != width * height * Self::CHANNELS {
            return Err(Error::InvalidFrame(format!(
                "buffer holds {} bytes, {width}x{height} RGB needs {}",
                pixels.len(),
                width * height * Self::CHANNELS
            )));
        }
        Ok(Frame {
            width,
            height,
            index,
            pixels,
        })
    }

    /// A frame filled with one colour.
    pub fn filled(width: usize, height: usize, index: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Frame {
            width,
            height,
            index,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "mask buffer holds {} bits, {width}x{height} needs {}",
                bits.len(),
                width * height
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// True if every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Pixel-wise AND.
    pub fn intersect(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle with inclusive bounds in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Convex polygon, counter-clockwise in (x, y) coordinates.
pub type Polygon = Vec<Point>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WindowOp {
    All,
    Any,
}

/// Binary erosion with a `kernel_w` x `kernel_h` rectangle, repeated.
pub fn erode(mask: &BinaryMask, kernel_w: usize, kernel_h: usize, iterations: usize) -> BinaryMask {
    morph(mask, kernel_w, kernel_h, iterations, WindowOp::All)
}

/// Binary dilation with a `kernel_w` x `kernel_h` rectangle, repeated.
pub fn dilate(
    mask: &BinaryMask,
    kernel_w: usize,
    kernel_h: usize,
    iterations: usize,
) -> BinaryMask {
    morph(mask, kernel_w, kernel_h, iterations, WindowOp::Any)
}

fn morph(mask: &BinaryMask, kw: usize, kh: usize, iterations: usize, op: WindowOp) -> BinaryMask {
    assert!(kw >= 1 && kh >= 1, "kernel dimensions must be at least 1");
    if iterations == 0 {
        return mask.clone();
    }
    // Repeating a top-left-anchored rectangle n times equals one pass with
    // a rectangle of side (k - 1) * n + 1 under the background border rule.
    let span_x = (kw - 1) * iterations + 1;
    let span_y = (kh - 1) * iterations + 1;
    let rows = window_rows(mask, span_x, op);
    window_cols(&rows, mask.width, mask.height, span_y, op)
}

fn window_rows(mask: &BinaryMask, span: usize, op: WindowOp) -> Vec<bool> {
    let (w, h) = (mask.width, mask.height);
    let mut out = vec![false; w * h];
    if span == 1 {
        out.copy_from_slice(&mask.bits);
        return out;
    }
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        let dst = &mut out[y * w..(y + 1) * w];
        match op {
            WindowOp::All => {
                // Length of the run of foreground starting at x.
                let mut run = 0usize;
                for x in (0..w).rev() {
                    run = if row[x] { run + 1 } else { 0 };
                    dst[x] = run >= span;
                }
            }
            WindowOp::Any => {
                // Distance to the nearest foreground pixel at or after x.
                let mut next = usize::MAX;
                for x in (0..w).rev() {
                    if row[x] {
                        next = x;
                    }
                    dst[x] = next != usize::MAX && next - x < span;
                }
            }
        }
    }
    out
}

fn window_cols(src: &[bool], w: usize, h: usize, span: usize, op: WindowOp) -> BinaryMask {
    let mut out = vec![false; w * h];
    if span == 1 {
        out.copy_from_slice(src);
        return BinaryMask {
            width: w,
            height: h,
            bits: out,
        };
    }
    // Processed bottom-up one row at a time to stay cache friendly.
    let mut state = vec![0usize; w];
    match op {
        WindowOp::All => {
            for y in (0..h).rev() {
                for x in 0..w {
                    state[x] = if src[y * w + x] { state[x] + 1 } else { 0 };
                    out[y * w + x] = state[x] >= span;
                }
            }
        }
        WindowOp::Any => {
            state.fill(usize::MAX);
            for y in (0..h).rev() {
                for x in 0..w {
                    if src[y * w + x] {
                        state[x] = y;
                    }
                    out[y * w + x] = state[x] != usize::MAX && state[x] - y < span;
                }
            }
        }
    }
    BinaryMask {
        width: w,
        height: h,
        bits: out,
    }
}

/// Labels 8-connected components in row-major discovery order.
///
/// Returns per-pixel labels (0 = background, components numbered from 1)
/// and the pixel count of each component, indexed by `label - 1`.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let x_lo = x.saturating_sub(1);
            let x_hi = (x + 1).min(w - 1);
            let y_lo = y.saturating_sub(1);
            let y_hi = (y + 1).min(h - 1);
            for ny in y_lo..=y_hi {
                for nx in x_lo..=x_hi {
                    let j = ny * w + nx;
                    if mask.bits[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// The 8-connected component with the most pixels. Ties go to the
/// component whose first pixel comes first in row-major order.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, sizes) = label_components(mask);
    let mut best: Option<(usize, usize)> = None;
    for (i, &size) in sizes.iter().enumerate() {
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((i, size));
        }
    }
    let mut out = BinaryMask::new(mask.width, mask.height);
    if let Some((i, _)) = best {
        let keep = i as u32 + 1;
        for (dst, &l) in out.bits.iter_mut().zip(&labels) {
            *dst = l == keep;
        }
    }
    out
}

/// Centroid by the method of moments: `(m10 / m00, m01 / m00)`.
pub fn centroid(mask: &BinaryMask) -> Result<Point> {
    let (mut m00, mut m10, mut m01) = (0u64, 0u64, 0u64);
    for (x, y) in mask.foreground() {
        m00 += 1;
        m10 += x as u64;
        m01 += y as u64;
    }
    if m00 == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(Point::new(m10 as f64 / m00 as f64, m01 as f64 / m00 as f64))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull of the foreground pixel coordinates, counter-clockwise with
/// collinear vertices removed. A single pixel yields one vertex and a
/// collinear set yields its two extreme points.
pub fn convex_hull(mask: &BinaryMask) -> Result<Polygon> {
    // Only the extreme pixels of each row can be hull vertices.
    let mut pts = Vec::new();
    for y in 0..mask.height {
        let row = &mask.bits[y * mask.width..(y + 1) * mask.width];
        if let Some(first) = row.iter().position(|&b| b) {
            let last = row.iter().rposition(|&b| b).unwrap();
            pts.push(Point::new(first as f64, y as f64));
            if last != first {
                pts.push(Point::new(last as f64, y as f64));
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(hull_of_points(pts))
}

/// Andrew's monotone chain over arbitrary points.
pub fn hull_of_points(mut pts: Vec<Point>) -> Polygon {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Whether `p` lies inside or on the convex polygon, with `tol` slack on
/// the boundary.
pub fn polygon_contains(hull: &[Point], p: Point, tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].distance(p) <= tol,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let len = a.distance(b);
            let off_line = cross(a, b, p).abs() / len;
            let t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
            off_line <= tol && t >= -tol / len && t <= 1.0 + tol / len
        }
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            cross(a, b, p) / a.distance(b) >= -tol
        }),
    }
}

/// Tight axis-aligned bounds of a polygon.
pub fn bounding_box(hull: &[Point]) -> Result<Rect> {
    let first = hull.first().ok_or(Error::EmptyMask)?;
    Ok(hull.iter().fold(
        Rect {
            x_min: first.x,
            y_min: first.y,
            x_max: first.x,
            y_max: first.y,
        },
        |r, p| Rect {
            x_min: r.x_min.min(p.x),
            y_min: r.y_min.min(p.y),
            x_max: r.x_max.max(p.x),
            y_max: r.y_max.max(p.y),
        },
    ))
}
