//! Frame input: a directory of numbered PNG images, or a raw planar RGB
//! stream with a JSON sidecar header.
//!
//! Raw streams store each frame as three full planes (R, then G, then B),
//! frames back to back with no padding. The sidecar sits next to the stream
//! with a `.json` extension and holds [`StreamInfo`].

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::raster::Frame;

pub const DEFAULT_FPS: f64 = 30.0;
/// Optional metadata file inside a PNG directory.
pub const DIR_SIDECAR: &str = "stream.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frame_count: usize,
}

impl StreamInfo {
    fn validate(&self, path: &Path) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidFrame(format!(
                "{}: zero frame dimensions",
                path.display()
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidFrame(format!(
                "{}: fps must be positive",
                path.display()
            )));
        }
        Ok(())
    }

    pub fn frame_bytes(&self) -> usize {
        self.width * self.height * 3
    }
}

/// Random-access frame reader. Indices run from 0 to `info().frame_count - 1`.
pub trait FrameSource {
    fn info(&self) -> StreamInfo;
    fn read(&mut self, index: usize) -> Result<Frame>;
}

fn out_of_range(index: usize, count: usize) -> Error {
    Error::InvalidFrame(format!("frame {index} out of range (have {count})"))
}

/// Frames held in memory.
#[derive(Debug, Clone)]
pub struct MemorySource {
    frames: Vec<Frame>,
    fps: f64,
}

impl MemorySource {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::NoFrames(PathBuf::from("<memory>")))?;
        let (w, h) = (first.width(), first.height());
        if let Some(f) = frames.iter().find(|f| f.width() != w || f.height() != h) {
            return Err(Error::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                actual_w: f.width(),
                actual_h: f.height(),
            });
        }
        let src = MemorySource { frames, fps };
        src.info().validate(Path::new("<memory>"))?;
        Ok(src)
    }
}

impl FrameSource for MemorySource {
    fn info(&self) -> StreamInfo {
        StreamInfo {
            width: self.frames[0].width(),
            height: self.frames[0].height(),
            fps: self.fps,
            frame_count: self.frames.len(),
        }
    }

    fn read(&mut self, index: usize) -> Result<Frame> {
        let mut f = self
            .frames
            .get(index)
            .cloned()
            .ok_or_else(|| out_of_range(index, self.frames.len()))?;
        f.index = index;
        Ok(f)
    }
}

/// A directory of PNG files, ordered by name. Every image must share the
/// dimensions of the first.
#[derive(Debug, Clone)]
pub struct PngDirectory {
    files: Vec<PathBuf>,
    info: StreamInfo,
}

impl PngDirectory {
    /// Opens `dir`. The frame rate comes from `fps`, else from a
    /// `stream.json` sidecar in the directory, else [`DEFAULT_FPS`].
    pub fn open(dir: impl AsRef<Path>, fps: Option<f64>) -> Result<Self> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let is_png = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if is_png && path.is_file() {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(Error::NoFrames(dir.to_path_buf()));
        }
        files.sort();
        let sidecar = dir.join(DIR_SIDECAR);
        let fps = match fps {
            Some(f) => f,
            None if sidecar.is_file() => read_sidecar(&sidecar)?.fps,
            None => DEFAULT_FPS,
        };
        let (width, height) = image::image_dimensions(&files[0])?;
        let info = StreamInfo {
            width: width as usize,
            height: height as usize,
            fps,
            frame_count: files.len(),
        };
        info.validate(dir)?;
        Ok(PngDirectory { files, info })
    }
}

impl FrameSource for PngDirectory {
    fn info(&self) -> StreamInfo {
        self.info
    }

    fn read(&mut self, index: usize) -> Result<Frame> {
        let path = self
            .files
            .get(index)
            .ok_or_else(|| out_of_range(index, self.files.len()))?;
        let frame = read_png(path, index)?;
        if frame.width() != self.info.width || frame.height() != self.info.height {
            return Err(Error::DimensionMismatch {
                expected_w: self.info.width,
                expected_h: self.info.height,
                actual_w: frame.width(),
                actual_h: frame.height(),
            });
        }
        Ok(frame)
    }
}

pub fn read_png(path: &Path, index: usize) -> Result<Frame> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Frame::new(w, h, index, img.into_raw())
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let img = image::RgbImage::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        frame.pixels().to_vec(),
    )
    .ok_or_else(|| Error::InvalidFrame("pixel buffer does not match dimensions".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// File name used for frame `index` in a PNG directory.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

/// Writes frames as `frame_000000.png`, ... plus a `stream.json` sidecar.
pub fn write_png_dir<'a>(
    frames: impl IntoIterator<Item = &'a Frame>,
    dir: &Path,
    fps: f64,
) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut info: Option<StreamInfo> = None;
    for (i, f) in frames.into_iter().enumerate() {
        write_atomic(&dir.join(frame_file_name(i)), &encode_png(f)?)?;
        let inf = info.get_or_insert(StreamInfo {
            width: f.width(),
            height: f.height(),
            fps,
            frame_count: 0,
        });
        inf.frame_count += 1;
    }
    let info = info.ok_or_else(|| Error::NoFrames(dir.to_path_buf()))?;
    write_atomic(&dir.join(DIR_SIDECAR), &serde_json::to_vec_pretty(&info)?)?;
    Ok(info.frame_count)
}

/// Writes every frame of a source as a PNG directory with a sidecar.
pub fn write_source_png(source: &mut dyn FrameSource, dir: &Path) -> Result<StreamInfo> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let info = source.info();
    for i in 0..info.frame_count {
        write_atomic(
            &dir.join(frame_file_name(i)),
            &encode_png(&source.read(i)?)?,
        )?;
    }
    write_atomic(&dir.join(DIR_SIDECAR), &serde_json::to_vec_pretty(&info)?)?;
    Ok(info)
}

pub fn sidecar_path(stream: &Path) -> PathBuf {
    stream.with_extension("json")
}

fn read_sidecar(path: &Path) -> Result<StreamInfo> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let info: StreamInfo = serde_json::from_str(&text)?;
    info.validate(path)?;
    Ok(info)
}

/// Raw planar RGB stream.
#[derive(Debug)]
pub struct RawStream {
    file: File,
    info: StreamInfo,
    plane: Vec<u8>,
}

impl RawStream {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let info = read_sidecar(&sidecar_path(path))?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let expected = (info.frame_bytes() * info.frame_count) as u64;
        if len < expected {
            return Err(Error::InvalidFrame(format!(
                "{}: {len} bytes, header promises {expected}",
                path.display()
            )));
        }
        if info.frame_count == 0 {
            return Err(Error::NoFrames(path.to_path_buf()));
        }
        Ok(RawStream {
            file,
            plane: vec![0; info.frame_bytes()],
            info,
        })
    }
}

impl FrameSource for RawStream {
    fn info(&self) -> StreamInfo {
        self.info
    }

    fn read(&mut self, index: usize) -> Result<Frame> {
        if index >= self.info.frame_count {
            return Err(out_of_range(index, self.info.frame_count));
        }
        let n = self.info.frame_bytes();
        let io = |e| Error::io("<raw stream>", e);
        self.file
            .seek(SeekFrom::Start((index * n) as u64))
            .map_err(io)?;
        self.file.read_exact(&mut self.plane).map_err(io)?;
        let px = self.info.width * self.info.height;
        let mut out = vec![0u8; n];
        for (i, rgb) in out.chunks_exact_mut(3).enumerate() {
            rgb[0] = self.plane[i];
            rgb[1] = self.plane[px + i];
            rgb[2] = self.plane[2 * px + i];
        }
        Frame::new(self.info.width, self.info.height, index, out)
    }
}

/// Writes a planar stream and its sidecar.
pub fn write_raw_stream(frames: &[Frame], path: &Path, fps: f64) -> Result<StreamInfo> {
    let first = frames
        .first()
        .ok_or_else(|| Error::NoFrames(path.to_path_buf()))?;
    let info = StreamInfo {
        width: first.width(),
        height: first.height(),
        fps,
        frame_count: frames.len(),
    };
    info.validate(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for f in frames {
        if f.width() != info.width || f.height() != info.height {
            return Err(Error::DimensionMismatch {
                expected_w: info.width,
                expected_h: info.height,
                actual_w: f.width(),
                actual_h: f.height(),
            });
        }
        for c in 0..3 {
            let plane: Vec<u8> = f.pixels().iter().skip(c).step_by(3).copied().collect();
            w.write_all(&plane).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&info)?)?;
    Ok(info)
}

/// Opens a PNG directory or, for a file, a raw stream.
pub fn open_source(path: &Path, fps: Option<f64>) -> Result<Box<dyn FrameSource + Send>> {
    if path.is_dir() {
        Ok(Box::new(PngDirectory::open(path, fps)?))
    } else {
        let mut s = RawStream::open(path)?;
        if let Some(f) = fps {
            s.info.fps = f;
            s.info.validate(path)?;
        }
        Ok(Box::new(s))
    }
}
