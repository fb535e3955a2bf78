//! Canny-style edge detection with adaptive, per-frame thresholds.
//!
//! Stages: 5×5 Gaussian blur, Sobel gradients, four-way direction
//! quantization, non-maximum suppression, mean/σ thresholds, and hysteresis.
//! Both convolutions replicate border pixels.
//!
//! The blur and Sobel stages run in exact integer arithmetic: blurred values
//! are carried as `159 × intensity` so that gradient components, and therefore
//! equal magnitudes, compare exactly. Magnitudes are reported in intensity
//! units.

use std::f64::consts::PI;

use thiserror::Error;

use crate::frame_io::{GrayFrame, MIN_FRAME_SIDE};

/// Blur kernel numerators; the kernel is this matrix divided by [`BLUR_NORM`].
pub const BLUR_KERNEL: [[i32; 5]; 5] = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
];
pub const BLUR_NORM: i32 = 159;

/// Horizontal derivative kernel, applied as a correlation.
pub const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
/// Vertical derivative kernel, applied as a correlation; positive when
/// intensity increases toward the top of the image.
pub const SOBEL_Y: [[i32; 3]; 3] = [[1, 2, 1], [0, 0, 0], [-1, -2, -1]];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EdgeError {
    #[error("image {width}x{height} is smaller than the 5x5 blur kernel")]
    TooSmall { width: usize, height: usize },
    #[error("stage inputs have mismatched dimensions")]
    DimensionMismatch,
}

/// Output of the blur stage. Values are stored scaled by 159 so they stay
/// integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Blurred {
    width: usize,
    height: usize,
    scaled: Vec<i32>,
}

impl Blurred {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.scaled[y * self.width + x] as f64 / BLUR_NORM as f64
    }

    /// Blurred intensities as reals.
    pub fn values(&self) -> Vec<f64> {
        self.scaled
            .iter()
            .map(|&v| v as f64 / BLUR_NORM as f64)
            .collect()
    }

    /// Raw `159 × intensity` sums.
    pub fn scaled(&self) -> &[i32] {
        &self.scaled
    }
}

/// Quantized gradient direction. Angles are measured from the +x axis toward
/// the top of the image and folded into `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    Horizontal = 0,
    Diagonal45 = 1,
    Vertical = 2,
    Diagonal135 = 3,
}

impl Direction {
    pub fn radians(self) -> f64 {
        match self {
            Direction::Horizontal => 0.0,
            Direction::Diagonal45 => PI / 4.0,
            Direction::Vertical => PI / 2.0,
            Direction::Diagonal135 => 3.0 * PI / 4.0,
        }
    }

    /// Bins raw gradient components. Equivalent to folding `atan2(dy, dx)`
    /// into `[0, π)` and bucketing at π/8, 3π/8, 5π/8 and 7π/8, but uses
    /// tangent comparisons; integer components never land on a bin edge.
    pub fn from_components(dx: i32, dy: i32) -> Direction {
        const TAN_PI_8: f64 = 0.414_213_562_373_095_03;
        // Indexed by [near horizontal, near vertical, same sign]. Noisy
        // frames make branches here unpredictable, so there are none.
        // `<=` is exact: the bound is irrational, so equality only happens
        // at dx = dy = 0, which counts as horizontal.
        const TABLE: [Direction; 8] = [
            Direction::Diagonal135,
            Direction::Horizontal,
            Direction::Vertical,
            Direction::Horizontal,
            Direction::Diagonal45,
            Direction::Horizontal,
            Direction::Vertical,
            Direction::Horizontal,
        ];
        let (adx, ady) = ((dx as f64).abs(), (dy as f64).abs());
        let horizontal = ady <= TAN_PI_8 * adx;
        let vertical = adx < TAN_PI_8 * ady;
        let same_sign = (dx ^ dy) >= 0;
        TABLE[usize::from(horizontal) | usize::from(vertical) << 1 | usize::from(same_sign) << 2]
    }

    /// Image-coordinate offsets of the two neighbours compared during
    /// non-maximum suppression (rows grow downward).
    fn neighbour_offsets(self) -> [(isize, isize); 2] {
        match self {
            Direction::Horizontal => [(-1, 0), (1, 0)],
            Direction::Vertical => [(0, -1), (0, 1)],
            Direction::Diagonal45 => [(1, -1), (-1, 1)],
            Direction::Diagonal135 => [(-1, -1), (1, 1)],
        }
    }
}

/// Sobel response of the blurred image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    dx: Vec<i32>,
    dy: Vec<i32>,
    magnitude: Vec<f64>,
    direction: Vec<Direction>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Horizontal derivative in intensity units.
    pub fn dx(&self, x: usize, y: usize) -> f64 {
        self.dx[y * self.width + x] as f64 / BLUR_NORM as f64
    }

    pub fn dy(&self, x: usize, y: usize) -> f64 {
        self.dy[y * self.width + x] as f64 / BLUR_NORM as f64
    }

    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        self.magnitude[y * self.width + x]
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitude
    }

    /// Continuous angle in `[0, π)`; 0 where the gradient vanishes.
    pub fn angle(&self, x: usize, y: usize) -> f64 {
        let i = y * self.width + x;
        if self.dx[i] == 0 && self.dy[i] == 0 {
            return 0.0;
        }
        let mut a = (self.dy[i] as f64).atan2(self.dx[i] as f64);
        if a < 0.0 {
            a += PI;
        }
        if a >= PI {
            a -= PI;
        }
        a
    }

    pub fn direction(&self, x: usize, y: usize) -> Direction {
        self.direction[y * self.width + x]
    }

    pub fn quantized(&self, x: usize, y: usize) -> f64 {
        self.direction(x, y).radians()
    }
}

/// Magnitudes surviving non-maximum suppression; zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinEdgeMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ThinEdgeMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, EdgeError> {
        if values.len() != width * height {
            return Err(EdgeError::DimensionMismatch);
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub mean: f64,
    pub stddev: f64,
    pub t_low: f64,
    pub t_high: f64,
}

/// Binary edge matrix. `origin` locates its top-left pixel in the source
/// frame, which is non-zero when edges were computed on a crop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    origin: (usize, usize),
    bits: Vec<u8>,
}

impl EdgeMap {
    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, EdgeError> {
        if bits.len() != width * height || bits.iter().any(|&b| b > 1) {
            return Err(EdgeError::DimensionMismatch);
        }
        Ok(Self {
            width,
            height,
            origin: (0, 0),
            bits,
        })
    }

    pub fn with_origin(mut self, x: usize, y: usize) -> Self {
        self.origin = (x, y);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Edge bit at map-local coordinates.
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

/// How intermediate pixels are promoted during hysteresis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HysteresisMode {
    /// One promotion pass: an intermediate pixel becomes an edge iff one of
    /// its 8 neighbours was strong in the first pass.
    #[default]
    SinglePass,
    /// Classic Canny: promotion propagates through chains of intermediates.
    Transitive,
}

fn check_size(width: usize, height: usize) -> Result<(), EdgeError> {
    if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
        return Err(EdgeError::TooSmall { width, height });
    }
    Ok(())
}

/// Copies `src` into a buffer padded by `pad` on every side, replicating
/// border values.
fn pad_replicate<T: Copy + Default>(src: &[T], width: usize, height: usize, pad: usize) -> Vec<T> {
    let pw = width + 2 * pad;
    let mut out = vec![T::default(); pw * (height + 2 * pad)];
    for py in 0..height + 2 * pad {
        let sy = py.saturating_sub(pad).min(height - 1);
        let src_row = &src[sy * width..(sy + 1) * width];
        let dst = &mut out[py * pw..(py + 1) * pw];
        dst[..pad].fill(src_row[0]);
        dst[pad..pad + width].copy_from_slice(src_row);
        dst[pad + width..].fill(src_row[width - 1]);
    }
    out
}

/// Blurs with the 5×5 kernel.
pub fn gaussian_blur(frame: &GrayFrame) -> Result<Blurred, EdgeError> {
    blur_pixels(frame.pixels(), frame.width(), frame.height())
}

pub(crate) fn blur_pixels(
    pixels: &[u8],
    width: usize,
    height: usize,
) -> Result<Blurred, EdgeError> {
    check_size(width, height)?;
    let padded: Vec<i32> = pad_replicate(pixels, width, height, 2)
        .into_iter()
        .map(i32::from)
        .collect();
    let pw = width + 4;
    let mut scaled = vec![0i32; width * height];
    // The kernel is symmetric in both axes, so mirrored rows are summed
    // first and each row sum is weighted by one kernel column.
    let mut outer = vec![0i32; pw];
    let mut inner = vec![0i32; pw];
    for y in 0..height {
        let row = |k: usize| &padded[(y + k) * pw..(y + k + 1) * pw];
        let (r0, r1, r2, r3, r4) = (row(0), row(1), row(2), row(3), row(4));
        for i in 0..pw {
            outer[i] = r0[i] + r4[i];
            inner[i] = r1[i] + r3[i];
        }
        let out = &mut scaled[y * width..(y + 1) * width];
        let k = &BLUR_KERNEL;
        for (x, o) in out.iter_mut().enumerate() {
            *o = (outer[x] + outer[x + 4]) * k[0][0]
                + (outer[x + 1] + outer[x + 3]) * k[0][1]
                + outer[x + 2] * k[0][2]
                + (inner[x] + inner[x + 4]) * k[1][0]
                + (inner[x + 1] + inner[x + 3]) * k[1][1]
                + inner[x + 2] * k[1][2]
                + (r2[x] + r2[x + 4]) * k[2][0]
                + (r2[x + 1] + r2[x + 3]) * k[2][1]
                + r2[x + 2] * k[2][2];
        }
    }
    Ok(Blurred {
        width,
        height,
        scaled,
    })
}

/// Sobel gradients, magnitudes and quantized directions.
pub fn compute_gradients(blurred: &Blurred) -> GradientField {
    let (width, height) = (blurred.width, blurred.height);
    let padded = pad_replicate(&blurred.scaled, width, height, 1);
    let pw = width + 2;
    let n = width * height;
    let mut dx = vec![0i32; n];
    let mut dy = vec![0i32; n];
    for y in 0..height {
        let up = &padded[y * pw..(y + 1) * pw];
        let mid = &padded[(y + 1) * pw..(y + 2) * pw];
        let down = &padded[(y + 2) * pw..(y + 3) * pw];
        let row_dx = &mut dx[y * width..(y + 1) * width];
        let row_dy = &mut dy[y * width..(y + 1) * width];
        let (u0, u1, u2) = (&up[..width], &up[1..width + 1], &up[2..]);
        let (m0, m2) = (&mid[..width], &mid[2..]);
        let (d0, d1, d2) = (&down[..width], &down[1..width + 1], &down[2..]);
        for x in 0..width {
            row_dx[x] = (u2[x] - u0[x]) + 2 * (m2[x] - m0[x]) + (d2[x] - d0[x]);
            row_dy[x] = (u0[x] + 2 * u1[x] + u2[x]) - (d0[x] + 2 * d1[x] + d2[x]);
        }
    }
    let mut magnitude = vec![0.0; n];
    let mut direction = vec![Direction::Horizontal; n];
    for ((m, &gx), &gy) in magnitude.iter_mut().zip(&dx).zip(&dy) {
        // Components stay below 2^20, so the squared sum is exact in f64.
        let (fx, fy) = (gx as f64, gy as f64);
        *m = (fx * fx + fy * fy).sqrt() / BLUR_NORM as f64;
    }
    for ((d, &gx), &gy) in direction.iter_mut().zip(&dx).zip(&dy) {
        *d = Direction::from_components(gx, gy);
    }
    GradientField {
        width,
        height,
        dx,
        dy,
        magnitude,
        direction,
    }
}

/// Non-maximum suppression along the quantized gradient direction. A pixel
/// keeps its magnitude when it is at least as large as both neighbours;
/// neighbours outside the image count as zero.
pub fn thin_edges(grad: &GradientField) -> ThinEdgeMap {
    let (w, h) = (grad.width, grad.height);
    let mag = &grad.magnitude;
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut values = vec![0.0; w * h];
    let keep = |x: usize, y: usize| -> bool {
        let i = y * w + x;
        let [(ax, ay), (bx, by)] = grad.direction[i].neighbour_offsets();
        let (xi, yi) = (x as isize, y as isize);
        mag[i] >= at(xi + ax, yi + ay) && mag[i] >= at(xi + bx, yi + by)
    };
    // Interior pixels compare against i ± step for their bin.
    let steps = [1, w - 1, w, w + 1];
    for y in 0..h {
        let border: &mut dyn FnMut(usize) = &mut |x| {
            if keep(x, y) {
                values[y * w + x] = mag[y * w + x];
            }
        };
        if y == 0 || y == h - 1 {
            (0..w).for_each(border);
            continue;
        }
        border(0);
        border(w - 1);
        for i in y * w + 1..(y + 1) * w - 1 {
            let m = mag[i];
            let step = steps[grad.direction[i] as usize];
            let kept = (m >= mag[i - step]) & (m >= mag[i + step]);
            values[i] = if kept { m } else { 0.0 };
        }
    }
    ThinEdgeMap {
        width: w,
        height: h,
        values,
    }
}

/// Mean and population standard deviation over every entry of the thin map,
/// zeros included, with thresholds at mean ± σ/2.
pub fn adaptive_thresholds(thin: &ThinEdgeMap) -> ThresholdPair {
    let n = thin.values.len() as f64;
    let mean = thin.values.iter().sum::<f64>() / n;
    let var = thin
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let stddev = var.sqrt();
    ThresholdPair {
        mean,
        stddev,
        t_low: mean - 0.5 * stddev,
        t_high: mean + 0.5 * stddev,
    }
}

/// Hysteresis thresholding. Values above `t_high` are edges, values below
/// `t_low` are not, and values in between (bounds inclusive) are promoted
/// according to `mode`.
pub fn hysteresis_link(
    thin: &ThinEdgeMap,
    thresh: &ThresholdPair,
    mode: HysteresisMode,
) -> EdgeMap {
    let (w, h) = (thin.width, thin.height);
    const NONE: u8 = 0;
    const EDGE: u8 = 1;
    const PENDING: u8 = 2;
    let first: Vec<u8> = thin
        .values
        .iter()
        .map(|&v| {
            if v > thresh.t_high {
                EDGE
            } else if v < thresh.t_low {
                NONE
            } else {
                PENDING
            }
        })
        .collect();
    let mut bits = first.clone();
    match mode {
        HysteresisMode::SinglePass => {
            // Strong-pixel mask with a one-pixel empty border, so every
            // neighbour lookup is in bounds.
            let pw = w + 2;
            let mut strong = vec![0u8; pw * (h + 2)];
            for y in 0..h {
                for x in 0..w {
                    strong[(y + 1) * pw + x + 1] = u8::from(first[y * w + x] == EDGE);
                }
            }
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if first[i] == PENDING {
                        let c = (y + 1) * pw + x + 1;
                        let linked = strong[c - pw - 1]
                            | strong[c - pw]
                            | strong[c - pw + 1]
                            | strong[c - 1]
                            | strong[c + 1]
                            | strong[c + pw - 1]
                            | strong[c + pw]
                            | strong[c + pw + 1];
                        bits[i] = if linked != 0 { EDGE } else { NONE };
                    }
                }
            }
        }
        HysteresisMode::Transitive => {
            let mut stack: Vec<usize> = (0..w * h).filter(|&i| first[i] == EDGE).collect();
            while let Some(i) = stack.pop() {
                for j in neighbours8(i % w, i / w, w, h) {
                    if bits[j] == PENDING {
                        bits[j] = EDGE;
                        stack.push(j);
                    }
                }
            }
            for b in bits.iter_mut() {
                if *b == PENDING {
                    *b = NONE;
                }
            }
        }
    }
    EdgeMap {
        width: w,
        height: h,
        origin: (0, 0),
        bits,
    }
}

fn neighbours8(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
    (y0..=y1)
        .flat_map(move |ny| (x0..=x1).map(move |nx| (nx, ny)))
        .filter(move |&(nx, ny)| (nx, ny) != (x, y))
        .map(move |(nx, ny)| ny * w + nx)
}

/// Every intermediate product of one detector run, for inspection.
#[derive(Debug, Clone)]
pub struct EdgeStages {
    pub blurred: Blurred,
    pub gradients: GradientField,
    pub thin: ThinEdgeMap,
    pub thresholds: ThresholdPair,
    pub edges: EdgeMap,
}

pub fn detect_edges_staged(
    frame: &GrayFrame,
    mode: HysteresisMode,
) -> Result<EdgeStages, EdgeError> {
    let blurred = gaussian_blur(frame)?;
    let gradients = compute_gradients(&blurred);
    let thin = thin_edges(&gradients);
    let thresholds = adaptive_thresholds(&thin);
    let edges = hysteresis_link(&thin, &thresholds, mode);
    Ok(EdgeStages {
        blurred,
        gradients,
        thin,
        thresholds,
        edges,
    })
}

/// Runs the full detector with single-pass hysteresis.
pub fn detect_edges(frame: &GrayFrame) -> Result<EdgeMap, EdgeError> {
    detect_edges_with(frame, HysteresisMode::SinglePass)
}

pub fn detect_edges_with(frame: &GrayFrame, mode: HysteresisMode) -> Result<EdgeMap, EdgeError> {
    let blurred = gaussian_blur(frame)?;
    let gradients = compute_gradients(&blurred);
    let thin = thin_edges(&gradients);
    let thresholds = adaptive_thresholds(&thin);
    Ok(hysteresis_link(&thin, &thresholds, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frame(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> GrayFrame {
        let px = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        GrayFrame::new(w, h, px, 0, 0.0).unwrap()
    }

    #[test]
    fn kernel_sums_to_norm() {
        let s: i32 = BLUR_KERNEL.iter().flatten().sum();
        assert_eq!(s, BLUR_NORM);
    }

    #[test]
    fn blur_constant_frame() {
        let b = gaussian_blur(&frame(7, 6, |_, _| 93)).unwrap();
        assert!(b.values().iter().all(|&v| v == 93.0));
    }

    #[test]
    fn blur_impulse_reproduces_kernel() {
        let b = gaussian_blur(&frame(9, 9, |x, y| if (x, y) == (4, 4) { 159 } else { 0 })).unwrap();
        assert_eq!(b.value(4, 4), 15.0);
        assert_eq!(b.value(3, 4), 12.0);
        assert_eq!(b.value(5, 4), 12.0);
        assert_eq!(b.value(4, 2), 5.0);
        assert_eq!(b.value(2, 2), 2.0);
        assert_eq!(b.value(0, 0), 0.0);
    }

    #[test]
    fn blur_rejects_small_frames() {
        assert_eq!(
            blur_pixels(&[0; 16], 4, 4),
            Err(EdgeError::TooSmall {
                width: 4,
                height: 4
            })
        );
    }

    #[test]
    fn ramp_gradient() {
        let g = compute_gradients(&gaussian_blur(&frame(12, 12, |x, _| x as u8 * 10)).unwrap());
        for y in 3..9 {
            for x in 3..9 {
                assert_eq!(g.dx(x, y), 80.0);
                assert_eq!(g.dy(x, y), 0.0);
                assert_eq!(g.magnitude(x, y), 80.0);
                assert_eq!(g.direction(x, y), Direction::Horizontal);
            }
        }
    }

    #[test]
    fn direction_bins() {
        assert_eq!(Direction::from_components(3, 4), Direction::Diagonal45);
        assert_abs_diff_eq!(4f64.atan2(3.0), 0.927_295_218, epsilon = 1e-9);
        assert_eq!(Direction::from_components(-3, 4), Direction::Diagonal135);
        assert_eq!(Direction::from_components(-3, -4), Direction::Diagonal45);
        assert_eq!(Direction::from_components(0, 5), Direction::Vertical);
        assert_eq!(Direction::from_components(0, 0), Direction::Horizontal);
        assert_eq!(Direction::from_components(-7, 0), Direction::Horizontal);
        assert_eq!(Direction::from_components(10, 4), Direction::Horizontal);
        assert_eq!(Direction::from_components(10, 5), Direction::Diagonal45);
    }

    #[test]
    fn upward_brightening_has_positive_dy() {
        let g = compute_gradients(
            &gaussian_blur(&frame(9, 9, |_, y| if y < 4 { 200 } else { 0 })).unwrap(),
        );
        assert!(g.dy(4, 4) > 0.0);
        assert_eq!(g.direction(4, 4), Direction::Vertical);
    }

    #[test]
    fn single_pixel_magnitude_survives_nms() {
        let mut grad = compute_gradients(&gaussian_blur(&frame(7, 7, |_, _| 0)).unwrap());
        grad.magnitude[3 * 7 + 3] = 5.0;
        let thin = thin_edges(&grad);
        assert_eq!(thin.get(3, 3), 5.0);
        assert_eq!(thin.values().iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn flat_magnitude_field_fully_retained() {
        let mut grad = compute_gradients(&gaussian_blur(&frame(6, 6, |_, _| 0)).unwrap());
        grad.magnitude.iter_mut().for_each(|m| *m = 2.0);
        let thin = thin_edges(&grad);
        assert!(thin.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn thresholds_of_small_map() {
        let thin = ThinEdgeMap::from_values(2, 2, vec![0.0, 0.0, 0.0, 10.0]).unwrap();
        let t = adaptive_thresholds(&thin);
        assert_abs_diff_eq!(t.mean, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.stddev, (75.0f64 / 4.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.t_high, 4.665_063_509, epsilon = 1e-9);
        assert_abs_diff_eq!(t.t_low, 0.334_936_490, epsilon = 1e-9);
    }

    #[test]
    fn thresholds_of_zero_map() {
        let thin = ThinEdgeMap::from_values(3, 3, vec![0.0; 9]).unwrap();
        let t = adaptive_thresholds(&thin);
        assert_eq!((t.mean, t.stddev, t.t_low, t.t_high), (0.0, 0.0, 0.0, 0.0));
        let e = hysteresis_link(&thin, &t, HysteresisMode::SinglePass);
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn hysteresis_single_pass_strip() {
        let thin = ThinEdgeMap::from_values(3, 1, vec![10.0, 5.0, 5.0]).unwrap();
        let t = ThresholdPair {
            mean: 5.0,
            stddev: 4.0,
            t_low: 3.0,
            t_high: 7.0,
        };
        let e = hysteresis_link(&thin, &t, HysteresisMode::SinglePass);
        assert_eq!(e.bits(), &[1, 1, 0]);
        let e = hysteresis_link(&thin, &t, HysteresisMode::Transitive);
        assert_eq!(e.bits(), &[1, 1, 1]);
    }

    #[test]
    fn isolated_intermediate_dropped() {
        let thin =
            ThinEdgeMap::from_values(3, 3, vec![0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0])
                .unwrap();
        let t = ThresholdPair {
            mean: 0.0,
            stddev: 0.0,
            t_low: 3.0,
            t_high: 7.0,
        };
        assert_eq!(
            hysteresis_link(&thin, &t, HysteresisMode::SinglePass).count(),
            0
        );
    }

    #[test]
    fn constant_frame_has_no_edges() {
        assert_eq!(detect_edges(&frame(16, 12, |_, _| 120)).unwrap().count(), 0);
    }

    #[test]
    fn half_split_edges_hug_boundary() {
        let e = detect_edges(&frame(20, 10, |x, _| if x < 10 { 0 } else { 255 })).unwrap();
        assert!(e.count() > 0);
        for y in 0..10 {
            for x in 0..20 {
                if e.get(x, y) {
                    assert!((7..=12).contains(&x), "edge at column {x}");
                }
            }
        }
        // The boundary itself is marked on every row.
        for y in 0..10 {
            assert!(e.get(9, y) || e.get(10, y));
        }
    }
}
