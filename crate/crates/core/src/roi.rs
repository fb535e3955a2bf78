//! Regions of interest: detector-style boxes `(p_c, b_x, b_y, b_w, b_h)`,
//! the pixel rectangles derived from them, and per-frame box tracks loaded
//! from CSV.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Boxes with lower confidence are treated as "no infant detected".
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum RoiError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("box confidence {p_c} is below the floor {floor}")]
    NoDetection { p_c: f64, floor: f64 },
    #[error("rectangle [{x0},{x1}]x[{y0},{y1}] has zero area after clamping to the frame")]
    Degenerate { x0: i64, y0: i64, x1: i64, y1: i64 },
    #[error("cannot parse rectangle {0:?}: expected x0,y0,x1,y1")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("roi track line {line}: {reason}")]
    Format { line: u64, reason: String },
    #[error("roi track {0} contains no rows")]
    Empty(String),
}

/// Detector output for one frame: confidence, centre and size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiBox {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    #[serde(rename = "pc")]
    pub p_c: f64,
    #[serde(rename = "bx")]
    pub b_x: f64,
    #[serde(rename = "by")]
    pub b_y: f64,
    #[serde(rename = "bw")]
    pub b_w: f64,
    #[serde(rename = "bh")]
    pub b_h: f64,
}

impl RoiBox {
    pub fn validate(&self) -> Result<(), RoiError> {
        let finite = [self.p_c, self.b_x, self.b_y, self.b_w, self.b_h]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(RoiError::InvalidBox("non-finite field".into()));
        }
        if !(0.0..=1.0).contains(&self.p_c) {
            return Err(RoiError::InvalidBox(format!(
                "confidence {} outside [0,1]",
                self.p_c
            )));
        }
        if self.b_w <= 0.0 || self.b_h <= 0.0 {
            return Err(RoiError::InvalidBox(format!(
                "non-positive size {}x{}",
                self.b_w, self.b_h
            )));
        }
        Ok(())
    }
}

/// Inclusive pixel bounds `[x0,x1]×[y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoiRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RoiRect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self, RoiError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(RoiError::Degenerate {
                x0: x0 as i64,
                y0: y0 as i64,
                x1: x1 as i64,
                y1: y1 as i64,
            });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// `(x1 − x0)·(y1 − y0)`, matching the box width × height it came from.
    pub fn area(&self) -> f64 {
        ((self.x1 - self.x0) * (self.y1 - self.y0)) as f64
    }

    pub fn contains_rect(&self, other: &RoiRect) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1) as f64 / 2.0,
            (self.y0 + self.y1) as f64 / 2.0,
        )
    }

    pub fn width_px(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height_px(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x1 < width && self.y1 < height
    }
}

impl fmt::Display for RoiRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.x1, self.y1)
    }
}

/// Parses `x0,y0,x1,y1`.
impl FromStr for RoiRect {
    type Err = RoiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| RoiError::Parse(s.to_string()))?;
        match parts[..] {
            [x0, y0, x1, y1] => RoiRect::new(x0, y0, x1, y1),
            _ => Err(RoiError::Parse(s.to_string())),
        }
    }
}

/// Converts a box to the pixel rectangle `b ± size/2`, rounding each bound
/// to the nearest integer and clamping it into the frame.
pub fn roi_rect(
    bx: &RoiBox,
    frame_w: usize,
    frame_h: usize,
    confidence_floor: f64,
) -> Result<RoiRect, RoiError> {
    bx.validate()?;
    if bx.p_c < confidence_floor {
        return Err(RoiError::NoDetection {
            p_c: bx.p_c,
            floor: confidence_floor,
        });
    }
    let clamp = |v: f64, dim: usize| (v.round() as i64).clamp(0, dim as i64 - 1);
    let x0 = clamp(bx.b_x - 0.5 * bx.b_w, frame_w);
    let x1 = clamp(bx.b_x + 0.5 * bx.b_w, frame_w);
    let y0 = clamp(bx.b_y - 0.5 * bx.b_h, frame_h);
    let y1 = clamp(bx.b_y + 0.5 * bx.b_h, frame_h);
    if x0 >= x1 || y0 >= y1 {
        return Err(RoiError::Degenerate { x0, y0, x1, y1 });
    }
    Ok(RoiRect {
        x0: x0 as usize,
        y0: y0 as usize,
        x1: x1 as usize,
        y1: y1 as usize,
    })
}

/// Box updates keyed by frame. A frame without its own row uses the most
/// recent earlier row.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiTrack {
    boxes: Vec<RoiBox>,
}

impl RoiTrack {
    /// Builds a track from rows with strictly increasing frame indices.
    pub fn new(boxes: Vec<RoiBox>) -> Result<Self, TrackError> {
        for (i, b) in boxes.iter().enumerate() {
            let line = i as u64 + 2;
            b.validate().map_err(|e| TrackError::Format {
                line,
                reason: e.to_string(),
            })?;
            if i > 0 && b.frame_index <= boxes[i - 1].frame_index {
                return Err(TrackError::Format {
                    line,
                    reason: format!(
                        "frame {} does not follow frame {}",
                        b.frame_index,
                        boxes[i - 1].frame_index
                    ),
                });
            }
        }
        Ok(Self { boxes })
    }

    pub fn load(path: &Path) -> Result<Self, TrackError> {
        let file = std::fs::File::open(path).map_err(|source| TrackError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let track = Self::from_reader(file)?;
        if track.boxes.is_empty() {
            return Err(TrackError::Empty(path.display().to_string()));
        }
        Ok(track)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, TrackError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| TrackError::Format {
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let expected = ["frame", "pc", "bx", "by", "bw", "bh"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(TrackError::Format {
                line: 1,
                reason: format!("header must be {}", expected.join(",")),
            });
        }
        let mut boxes: Vec<RoiBox> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| TrackError::Format {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let b: RoiBox = record
                .deserialize(Some(&headers))
                .map_err(|e| TrackError::Format {
                    line,
                    reason: e.to_string(),
                })?;
            b.validate().map_err(|e| TrackError::Format {
                line,
                reason: e.to_string(),
            })?;
            if let Some(prev) = boxes.last() {
                if b.frame_index <= prev.frame_index {
                    return Err(TrackError::Format {
                        line,
                        reason: format!(
                            "frame {} does not follow frame {}",
                            b.frame_index, prev.frame_index
                        ),
                    });
                }
            }
            boxes.push(b);
        }
        Ok(Self { boxes })
    }

    pub fn write<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        for b in &self.boxes {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn boxes(&self) -> &[RoiBox] {
        &self.boxes
    }

    /// Box in force at `frame`, or `None` before the first row.
    pub fn box_for(&self, frame: u64) -> Option<&RoiBox> {
        let n = self.boxes.partition_point(|b| b.frame_index <= frame);
        n.checked_sub(1).map(|i| &self.boxes[i])
    }
}

/// Where per-frame rectangles come from.
#[derive(Debug, Clone)]
pub enum RoiSource {
    Fixed(RoiRect),
    Track {
        track: RoiTrack,
        confidence_floor: f64,
    },
}

impl RoiSource {
    /// Rectangle for `frame`, or `None` when no confident box covers it.
    pub fn rect_for(
        &self,
        frame: u64,
        width: usize,
        height: usize,
    ) -> Result<Option<RoiRect>, RoiError> {
        match self {
            RoiSource::Fixed(r) => Ok(Some(*r)),
            RoiSource::Track {
                track,
                confidence_floor,
            } => match track.box_for(frame) {
                None => Ok(None),
                Some(b) => match roi_rect(b, width, height, *confidence_floor) {
                    Ok(r) => Ok(Some(r)),
                    Err(RoiError::NoDetection { .. }) => Ok(None),
                    Err(e) => Err(e),
                },
            },
        }
    }
}
