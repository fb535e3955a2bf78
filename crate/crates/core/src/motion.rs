//! Edge-centroid tracking and the breathing signal derived from it.
//!
//! Per frame: the centroid of edge pixels inside the ROI, its velocity, the
//! dominant motion direction over the last ten velocities (PCA), the
//! velocity projected on that direction (`s0`) and its smoothed form (`s1`).

use std::collections::VecDeque;

use thiserror::Error;

use crate::edge_detect::EdgeMap;
use crate::roi::RoiRect;

/// Number of velocities in the PCA window.
pub const WINDOW_LEN: usize = 10;

/// Smoothing weights for the current and previous `s0`.
pub const SMOOTH_CURRENT: f64 = 0.8;
pub const SMOOTH_PREVIOUS: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("velocity needs consecutive frames, got {prev} then {cur}")]
    NonConsecutive { prev: u64, cur: u64 },
    #[error("velocity window holds {0} of {WINDOW_LEN} samples")]
    WindowNotFull(usize),
    #[error("roi {roi} is not covered by the edge map")]
    RoiOutsideEdges { roi: RoiRect },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
    pub frame_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDirection {
    pub ux: f64,
    pub uy: f64,
}

impl UnitDirection {
    pub const X_AXIS: UnitDirection = UnitDirection { ux: 1.0, uy: 0.0 };

    pub fn dot(&self, other: &UnitDirection) -> f64 {
        self.ux * other.ux + self.uy * other.uy
    }
}

/// Edge-weighted mean position over the ROI, in frame coordinates. An ROI
/// without edge pixels yields its own centre.
pub fn centroid(edges: &EdgeMap, roi: &RoiRect, frame_index: u64) -> Result<Centroid, MotionError> {
    let (ox, oy) = edges.origin();
    let covered =
        roi.x0 >= ox && roi.y0 >= oy && roi.x1 < ox + edges.width() && roi.y1 < oy + edges.height();
    if !covered {
        return Err(MotionError::RoiOutsideEdges { roi: *roi });
    }
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    let bits = edges.bits();
    for y in roi.y0..=roi.y1 {
        let row = (y - oy) * edges.width();
        for x in roi.x0..=roi.x1 {
            if bits[row + x - ox] == 1 {
                sx += x as u64;
                sy += y as u64;
                n += 1;
            }
        }
    }
    let (x, y) = if n == 0 {
        roi.center()
    } else {
        (sx as f64 / n as f64, sy as f64 / n as f64)
    };
    Ok(Centroid { x, y, frame_index })
}

pub fn velocity(cur: &Centroid, prev: &Centroid) -> Result<Velocity, MotionError> {
    if cur.frame_index != prev.frame_index + 1 {
        return Err(MotionError::NonConsecutive {
            prev: prev.frame_index,
            cur: cur.frame_index,
        });
    }
    Ok(Velocity {
        vx: cur.x - prev.x,
        vy: cur.y - prev.y,
    })
}

/// The most recent [`WINDOW_LEN`] velocities, newest first.
#[derive(Debug, Clone, Default)]
pub struct VelocityWindow {
    samples: VecDeque<Velocity>,
}

impl VelocityWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: Velocity) {
        if self.samples.len() == WINDOW_LEN {
            self.samples.pop_back();
        }
        self.samples.push_front(v);
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == WINDOW_LEN
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Velocity> {
        self.samples.iter()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

impl FromIterator<Velocity> for VelocityWindow {
    /// Collects newest-first velocities; only the first [`WINDOW_LEN`] are kept.
    fn from_iter<I: IntoIterator<Item = Velocity>>(iter: I) -> Self {
        Self {
            samples: iter.into_iter().take(WINDOW_LEN).collect(),
        }
    }
}

/// Eigen-decomposition of the window's 2×2 scatter matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes {
    pub direction: UnitDirection,
    pub lambda_major: f64,
    pub lambda_minor: f64,
    /// True when the scatter matrix had no unique major axis and the
    /// direction was carried over.
    pub degenerate: bool,
}

/// Scatter matrix `DᵀD` of the mean-centred window, as `(cxx, cxy, cyy)`.
pub fn scatter(win: &VelocityWindow) -> (f64, f64, f64) {
    let n = win.len() as f64;
    let mx = win.iter().map(|v| v.vx).sum::<f64>() / n;
    let my = win.iter().map(|v| v.vy).sum::<f64>() / n;
    win.iter().fold((0.0, 0.0, 0.0), |(a, b, c), v| {
        let (dx, dy) = (v.vx - mx, v.vy - my);
        (a + dx * dx, b + dx * dy, c + dy * dy)
    })
}

/// Principal axis of a full window with eigenvalues.
///
/// The major eigenvector of `[[a, b], [b, c]]` lies at angle
/// `½·atan2(2b, a − c)`. Its sign is chosen so that `u·prev ≥ 0`. A zero or
/// isotropic scatter matrix has no major axis; `prev` (or the x axis when
/// there is none) is returned instead.
pub fn principal_axes(
    win: &VelocityWindow,
    prev: Option<UnitDirection>,
) -> Result<PrincipalAxes, MotionError> {
    if !win.is_full() {
        return Err(MotionError::WindowNotFull(win.len()));
    }
    let (a, b, c) = scatter(win);
    let half_trace = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (lambda_major, lambda_minor) = (half_trace + radius, half_trace - radius);
    if b == 0.0 && a == c {
        return Ok(PrincipalAxes {
            direction: prev.unwrap_or(UnitDirection::X_AXIS),
            lambda_major,
            lambda_minor,
            degenerate: true,
        });
    }
    // `+ 0.0` folds −0 into +0 so the angle does not depend on the sign of zero.
    let theta = 0.5 * (2.0 * b + 0.0).atan2(a - c);
    let (sin, cos) = theta.sin_cos();
    let norm = cos.hypot(sin);
    let mut u = UnitDirection {
        ux: cos / norm,
        uy: sin / norm,
    };
    if let Some(p) = prev {
        if u.dot(&p) < 0.0 {
            u = UnitDirection {
                ux: -u.ux,
                uy: -u.uy,
            };
        }
    }
    Ok(PrincipalAxes {
        direction: u,
        lambda_major,
        lambda_minor,
        degenerate: false,
    })
}

pub fn principal_direction(
    win: &VelocityWindow,
    prev: Option<UnitDirection>,
) -> Result<UnitDirection, MotionError> {
    principal_axes(win, prev).map(|p| p.direction)
}

pub fn project_breath_sample(u: &UnitDirection, v: &Velocity) -> f64 {
    u.ux * v.vx + u.uy * v.vy
}

/// `0.8·cur + 0.2·prev`, evaluated as `cur + 0.2·(prev − cur)` so a constant
/// input passes through unchanged.
pub fn smooth_sample(s0_cur: f64, s0_prev: f64) -> f64 {
    s0_cur + SMOOTH_PREVIOUS * (s0_prev - s0_cur)
}

/// Everything derived for one frame. Fields after `centroid` are `None`
/// until enough history exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame_index: u64,
    pub centroid: Centroid,
    pub velocity: Option<Velocity>,
    pub direction: Option<UnitDirection>,
    pub s0: Option<f64>,
    pub s1: Option<f64>,
}

/// Sequential per-frame state: previous centroid, velocity window, previous
/// direction and previous `s0`.
#[derive(Debug, Clone, Default)]
pub struct MotionTracker {
    prev_centroid: Option<Centroid>,
    window: VelocityWindow,
    prev_direction: Option<UnitDirection>,
    prev_s0: Option<f64>,
}

impl MotionTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forgets all history, e.g. after frames without an ROI.
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Feeds the next centroid. A gap in frame indices restarts the history
    /// at this frame.
    pub fn push(&mut self, c: Centroid) -> TrackPoint {
        let mut point = TrackPoint {
            frame_index: c.frame_index,
            centroid: c,
            velocity: None,
            direction: None,
            s0: None,
            s1: None,
        };
        let prev = self.prev_centroid.replace(c);
        let Some(prev) = prev else {
            return point;
        };
        let v = match velocity(&c, &prev) {
            Ok(v) => v,
            Err(_) => {
                self.reset();
                self.prev_centroid = Some(c);
                return point;
            }
        };
        point.velocity = Some(v);
        self.window.push(v);
        if !self.window.is_full() {
            return point;
        }
        let u = principal_direction(&self.window, self.prev_direction).expect("window is full");
        self.prev_direction = Some(u);
        let s0 = project_breath_sample(&u, &v);
        let s1 = match self.prev_s0 {
            Some(p) => smooth_sample(s0, p),
            None => s0,
        };
        self.prev_s0 = Some(s0);
        point.direction = Some(u);
        point.s0 = Some(s0);
        point.s1 = Some(s1);
        point
    }
}
