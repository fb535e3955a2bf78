//! Frame decoding: 8-bit grayscale frames from PGM directories, Y4M streams
//! and headerless raw planar files.
//!
//! All readers yield frames lazily so long recordings can be processed
//! without holding the whole video in memory.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// Smallest accepted frame side; the blur kernel is 5×5.
pub const MIN_FRAME_SIDE: usize = 5;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{location}: bad magic, expected {expected}, found {found:?}")]
    BadMagic {
        location: String,
        expected: &'static str,
        found: String,
    },
    #[error("{location}: malformed header: {reason}")]
    Header { location: String, reason: String },
    #[error("frame {frame}: dimensions {found_w}x{found_h} differ from sequence dimensions {width}x{height}")]
    InconsistentDimensions {
        frame: u64,
        width: usize,
        height: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("frame {frame}: truncated pixel data")]
    Truncated { frame: u64 },
    #[error(
        "frame dimensions {width}x{height} are below the {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE} minimum"
    )]
    TooSmall { width: usize, height: usize },
    #[error("expected {expected} bytes of pixel data, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("missing required parameter {0}")]
    MissingParameter(&'static str),
    #[error("invalid frame rate {0:?}")]
    InvalidFps(String),
    #[error("no frames found in {0}")]
    Empty(PathBuf),
    #[error("crop [{x0},{x1}]x[{y0},{y1}] outside {width}x{height} frame")]
    CropOutOfBounds {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        width: usize,
        height: usize,
    },
}

/// Frames per second as a rational `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fps {
    num: u32,
    den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self, FrameError> {
        if num == 0 || den == 0 {
            return Err(FrameError::InvalidFps(format!("{num}/{den}")));
        }
        Ok(Self { num, den })
    }

    pub fn integer(fps: u32) -> Result<Self, FrameError> {
        Self::new(fps, 1)
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn frame_period_ms(&self) -> f64 {
        1000.0 * self.den as f64 / self.num as f64
    }

    /// Timestamp of frame `index`, computed from the index so that rounding
    /// errors never accumulate over long recordings.
    pub fn timestamp_ms(&self, index: u64) -> f64 {
        index as f64 * 1000.0 * self.den as f64 / self.num as f64
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}:{}", self.num, self.den)
        }
    }
}

/// Accepts `24`, `24:1` or `30000/1001`.
impl FromStr for Fps {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FrameError::InvalidFps(s.to_string());
        let s = s.trim();
        match s.split_once([':', '/']) {
            Some((n, d)) => Fps::new(n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?),
            None => Fps::integer(s.parse().map_err(|_| bad())?),
        }
    }
}

/// One 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    frame_index: u64,
    timestamp_ms: f64,
}

impl GrayFrame {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        frame_index: u64,
        timestamp_ms: f64,
    ) -> Result<Self, FrameError> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(FrameError::TooSmall { width, height });
        }
        if pixels.len() != width * height {
            return Err(FrameError::LengthMismatch {
                expected: width * height,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            frame_index,
            timestamp_ms,
        })
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

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn timestamp_ms(&self) -> f64 {
        self.timestamp_ms
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Copies the inclusive rectangle `[x0,x1]×[y0,y1]` into a new frame with
    /// the same index and timestamp.
    pub fn crop(
        &self,
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
    ) -> Result<GrayFrame, FrameError> {
        if x1 >= self.width || y1 >= self.height || x0 > x1 || y0 > y1 {
            return Err(FrameError::CropOutOfBounds {
                x0,
                y0,
                x1,
                y1,
                width: self.width,
                height: self.height,
            });
        }
        let w = x1 - x0 + 1;
        let mut out = Vec::with_capacity(w * (y1 - y0 + 1));
        for y in y0..=y1 {
            let row = y * self.width;
            out.extend_from_slice(&self.pixels[row + x0..=row + x1]);
        }
        GrayFrame::new(w, y1 - y0 + 1, out, self.frame_index, self.timestamp_ms)
    }
}

/// Converts an 8-bit RGB pixel to luma with weights 0.299/0.587/0.114,
/// rounding half up. Integer arithmetic keeps gray inputs exact.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let acc = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((acc + 500) / 1000).min(255) as u8
}

/// Decodes interleaved RGB triplets into a grayscale frame.
pub fn decode_frame(
    rgb: &[u8],
    width: usize,
    height: usize,
    frame_index: u64,
    fps: Fps,
) -> Result<GrayFrame, FrameError> {
    if rgb.len() != 3 * width * height {
        return Err(FrameError::LengthMismatch {
            expected: 3 * width * height,
            found: rgb.len(),
        });
    }
    let gray = rgb
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    GrayFrame::new(
        width,
        height,
        gray,
        frame_index,
        fps.timestamp_ms(frame_index),
    )
}

/// A fully decoded sequence. Prefer [`FrameSource`] for long inputs.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<GrayFrame>,
    pub fps: Fps,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayFrame>, fps: Fps) -> Result<Self, FrameError> {
        if let Some(first) = frames.first() {
            let (w, h) = (first.width, first.height);
            for f in &frames {
                if f.width != w || f.height != h {
                    return Err(FrameError::InconsistentDimensions {
                        frame: f.frame_index,
                        width: w,
                        height: h,
                        found_w: f.width,
                        found_h: f.height,
                    });
                }
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time covered by the sequence: frame count times frame period.
    pub fn duration_ms(&self) -> f64 {
        self.fps.timestamp_ms(self.frames.len() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    PgmDir,
    Y4m,
    Raw,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pgm-dir" | "pgm" => Ok(Self::PgmDir),
            "y4m" => Ok(Self::Y4m),
            "raw" | "raw-planar" => Ok(Self::Raw),
            other => Err(format!(
                "unknown input format {other:?} (expected pgm-dir, y4m or raw)"
            )),
        }
    }
}

impl InputFormat {
    /// Guesses the format from the path: directories are PGM sequences,
    /// `.y4m` files are Y4M, anything else is raw.
    pub fn infer(path: &Path) -> Self {
        if path.is_dir() {
            Self::PgmDir
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("y4m"))
        {
            Self::Y4m
        } else {
            Self::Raw
        }
    }
}

/// Options for opening an input. Y4M carries its own geometry and rate;
/// `fps` overrides the header when set.
#[derive(Debug, Clone, Default)]
pub struct SourceOptions {
    pub fps: Option<Fps>,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

enum SourceKind {
    PgmDir {
        paths: Vec<PathBuf>,
        next: usize,
    },
    Y4m {
        reader: BufReader<File>,
        path: PathBuf,
        chroma_bytes: usize,
    },
    Raw {
        reader: BufReader<File>,
    },
}

/// Lazy, ordered frame reader over one of the supported containers.
pub struct FrameSource {
    kind: SourceKind,
    width: usize,
    height: usize,
    fps: Fps,
    next_index: u64,
    done: bool,
}

impl FrameSource {
    pub fn open(
        path: &Path,
        format: InputFormat,
        opts: &SourceOptions,
    ) -> Result<Self, FrameError> {
        match format {
            InputFormat::PgmDir => Self::open_pgm_dir(path, opts),
            InputFormat::Y4m => Self::open_y4m(path, opts),
            InputFormat::Raw => Self::open_raw(path, opts),
        }
    }

    fn open_pgm_dir(dir: &Path, opts: &SourceOptions) -> Result<Self, FrameError> {
        let fps = opts.fps.ok_or(FrameError::MissingParameter("--fps"))?;
        let io_err = |source| FrameError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err)? {
            let p = entry.map_err(io_err)?.path();
            if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
                paths.push(p);
            }
        }
        paths.sort();
        let first = paths
            .first()
            .ok_or_else(|| FrameError::Empty(dir.to_path_buf()))?;
        let (width, height, _) = read_pgm(first)?;
        Ok(Self {
            kind: SourceKind::PgmDir { paths, next: 0 },
            width,
            height,
            fps,
            next_index: 0,
            done: false,
        })
    }

    fn open_y4m(path: &Path, opts: &SourceOptions) -> Result<Self, FrameError> {
        let file = File::open(path).map_err(|source| FrameError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = BufReader::new(file);
        let location = path.display().to_string();
        let line = read_line(&mut reader, 256).map_err(|e| FrameError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let header = parse_y4m_header(&line, &location)?;
        let fps = match opts.fps {
            Some(f) => f,
            None => header.fps.ok_or_else(|| FrameError::Header {
                location: location.clone(),
                reason: "no F parameter and no --fps given".into(),
            })?,
        };
        if header.width < MIN_FRAME_SIDE || header.height < MIN_FRAME_SIDE {
            return Err(FrameError::TooSmall {
                width: header.width,
                height: header.height,
            });
        }
        let chroma_bytes = if header.mono {
            0
        } else {
            2 * header.width.div_ceil(2) * header.height.div_ceil(2)
        };
        Ok(Self {
            kind: SourceKind::Y4m {
                reader,
                path: path.to_path_buf(),
                chroma_bytes,
            },
            width: header.width,
            height: header.height,
            fps,
            next_index: 0,
            done: false,
        })
    }

    fn open_raw(path: &Path, opts: &SourceOptions) -> Result<Self, FrameError> {
        let width = opts.width.ok_or(FrameError::MissingParameter("--width"))?;
        let height = opts
            .height
            .ok_or(FrameError::MissingParameter("--height"))?;
        let fps = opts.fps.ok_or(FrameError::MissingParameter("--fps"))?;
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(FrameError::TooSmall { width, height });
        }
        let file = File::open(path).map_err(|source| FrameError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            kind: SourceKind::Raw {
                reader: BufReader::new(file),
            },
            width,
            height,
            fps,
            next_index: 0,
            done: false,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    fn read_next(&mut self) -> Result<Option<GrayFrame>, FrameError> {
        let index = self.next_index;
        let (w, h) = (self.width, self.height);
        let pixels = match &mut self.kind {
            SourceKind::PgmDir { paths, next } => {
                let Some(p) = paths.get(*next) else {
                    return Ok(None);
                };
                *next += 1;
                let (fw, fh, pixels) = read_pgm(p)?;
                if (fw, fh) != (w, h) {
                    return Err(FrameError::InconsistentDimensions {
                        frame: index,
                        width: w,
                        height: h,
                        found_w: fw,
                        found_h: fh,
                    });
                }
                pixels
            }
            SourceKind::Y4m {
                reader,
                path,
                chroma_bytes,
            } => {
                let io_err = |source| FrameError::Io {
                    path: path.clone(),
                    source,
                };
                if reader.fill_buf().map_err(io_err)?.is_empty() {
                    return Ok(None);
                }
                let marker = read_line(reader, 1024).map_err(io_err)?;
                if marker != "FRAME" && !marker.starts_with("FRAME ") {
                    return Err(FrameError::BadMagic {
                        location: format!("{} frame {index}", path.display()),
                        expected: "FRAME",
                        found: marker.chars().take(16).collect(),
                    });
                }
                let mut pixels = vec![0u8; w * h];
                read_exact_or_truncated(reader, &mut pixels, index)?;
                let mut skip = vec![0u8; *chroma_bytes];
                read_exact_or_truncated(reader, &mut skip, index)?;
                pixels
            }
            SourceKind::Raw { reader } => {
                if reader
                    .fill_buf()
                    .map_err(|source| FrameError::Io {
                        path: PathBuf::from("<raw>"),
                        source,
                    })?
                    .is_empty()
                {
                    return Ok(None);
                }
                let mut pixels = vec![0u8; w * h];
                read_exact_or_truncated(reader, &mut pixels, index)?;
                pixels
            }
        };
        self.next_index += 1;
        GrayFrame::new(w, h, pixels, index, self.fps.timestamp_ms(index)).map(Some)
    }
}

impl Iterator for FrameSource {
    type Item = Result<GrayFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_next() {
            Ok(Some(f)) => Some(Ok(f)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads a whole input into memory.
pub fn load_sequence(
    path: &Path,
    format: InputFormat,
    opts: &SourceOptions,
) -> Result<FrameSequence, FrameError> {
    let source = FrameSource::open(path, format, opts)?;
    let fps = source.fps();
    let frames = source.collect::<Result<Vec<_>, _>>()?;
    if frames.is_empty() {
        return Err(FrameError::Empty(path.to_path_buf()));
    }
    FrameSequence::new(frames, fps)
}

fn read_exact_or_truncated<R: Read>(
    reader: &mut R,
    buf: &mut [u8],
    frame: u64,
) -> Result<(), FrameError> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::Truncated { frame },
        _ => FrameError::Io {
            path: PathBuf::from(format!("<frame {frame}>")),
            source: e,
        },
    })
}

/// Reads bytes up to (not including) `\n`, refusing lines longer than `limit`.
fn read_line<R: BufRead>(reader: &mut R, limit: usize) -> io::Result<String> {
    let mut buf = Vec::new();
    reader.take(limit as u64 + 1).read_until(b'\n', &mut buf)?;
    if buf.last() == Some(&b'\n') {
        buf.pop();
    } else if buf.len() > limit {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "header line too long",
        ));
    } else {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "unterminated header line",
        ));
    }
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub fps: Option<Fps>,
    pub mono: bool,
}

pub(crate) fn parse_y4m_header(line: &str, location: &str) -> Result<Y4mHeader, FrameError> {
    let mut tokens = line.split(' ').filter(|t| !t.is_empty());
    let magic = tokens.next().unwrap_or("");
    if magic != "YUV4MPEG2" {
        return Err(FrameError::BadMagic {
            location: location.to_string(),
            expected: "YUV4MPEG2",
            found: magic.chars().take(16).collect(),
        });
    }
    let header_err = |reason: String| FrameError::Header {
        location: location.to_string(),
        reason,
    };
    let (mut width, mut height, mut fps, mut mono) = (None, None, None, false);
    for tok in tokens {
        let (tag, value) = tok.split_at(1);
        match tag {
            "W" => {
                width = Some(
                    value
                        .parse()
                        .map_err(|_| header_err(format!("bad width {value:?}")))?,
                )
            }
            "H" => {
                height = Some(
                    value
                        .parse()
                        .map_err(|_| header_err(format!("bad height {value:?}")))?,
                )
            }
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| header_err(format!("bad frame rate {value:?}")))?;
                let parsed = n
                    .parse()
                    .ok()
                    .zip(d.parse().ok())
                    .and_then(|(n, d)| Fps::new(n, d).ok())
                    .ok_or_else(|| header_err(format!("bad frame rate {value:?}")))?;
                fps = Some(parsed);
            }
            "C" => {
                mono = match value {
                    "mono" => true,
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => false,
                    other => return Err(header_err(format!("unsupported colorspace {other:?}"))),
                }
            }
            // Interlacing, aspect ratio and extensions do not affect luma layout.
            _ => {}
        }
    }
    Ok(Y4mHeader {
        width: width.ok_or_else(|| header_err("missing W".into()))?,
        height: height.ok_or_else(|| header_err("missing H".into()))?,
        fps,
        mono,
    })
}

/// Reads a binary P5 PGM with maxval 255.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), FrameError> {
    let bytes = fs::read(path).map_err(|source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&bytes, &path.display().to_string())
}

pub fn decode_pgm(bytes: &[u8], location: &str) -> Result<(usize, usize, Vec<u8>), FrameError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    if magic != b"P5" {
        return Err(FrameError::BadMagic {
            location: location.to_string(),
            expected: "P5",
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let header_err = |reason: &str| FrameError::Header {
        location: location.to_string(),
        reason: reason.to_string(),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(header_err("expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| header_err("number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(header_err("missing whitespace after maxval"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(header_err(&format!("maxval must be 255, found {maxval}")));
    }
    let data = &bytes[pos..];
    if data.len() < width * height {
        return Err(FrameError::LengthMismatch {
            expected: width * height,
            found: data.len(),
        });
    }
    Ok((width, height, data[..width * height].to_vec()))
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[u8],
) -> Result<(), FrameError> {
    let mut file = File::create(path).map_err(|source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&encode_pgm(width, height, pixels))
        .map_err(|source| FrameError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// File name used for frame `index` in a PGM directory; zero padding keeps
/// lexicographic and numeric order identical.
pub fn pgm_frame_name(index: u64) -> String {
    format!("frame_{index:06}.pgm")
}
