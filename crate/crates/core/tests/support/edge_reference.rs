//! Naive reference edge detector: nested-loop convolutions with clamped
//! indices, `atan2` binning, and the two-loop threshold algorithm transcribed
//! line by line. Shared by several test targets.

#![allow(dead_code)]

use std::f64::consts::PI;

use apnea_core::frame_io::GrayFrame;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const K_BLUR: [[f64; 5]; 5] = [
    [2.0, 4.0, 5.0, 4.0, 2.0],
    [4.0, 9.0, 12.0, 9.0, 4.0],
    [5.0, 12.0, 15.0, 12.0, 5.0],
    [4.0, 9.0, 12.0, 9.0, 4.0],
    [2.0, 4.0, 5.0, 4.0, 2.0],
];
const K_DX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const K_DY: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]];

pub struct Reference {
    pub w: usize,
    pub h: usize,
    /// Blurred image times 159; integral, so f64 arithmetic on it is exact.
    pub blur159: Vec<f64>,
    pub dx159: Vec<f64>,
    pub dy159: Vec<f64>,
    pub mag: Vec<f64>,
    pub bin: Vec<f64>,
    pub thin: Vec<f64>,
    pub t_low: f64,
    pub t_high: f64,
    pub edges: Vec<u8>,
}

fn clamp_at(img: &[f64], w: usize, h: usize, x: i64, y: i64) -> f64 {
    let x = x.clamp(0, w as i64 - 1) as usize;
    let y = y.clamp(0, h as i64 - 1) as usize;
    img[y * w + x]
}

fn correlate<const N: usize>(img: &[f64], w: usize, h: usize, k: &[[f64; N]; N]) -> Vec<f64> {
    let r = (N / 2) as i64;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, row) in k.iter().enumerate() {
                for (i, &kv) in row.iter().enumerate() {
                    let sx = x as i64 + i as i64 - r;
                    let sy = y as i64 + j as i64 - r;
                    acc += kv * clamp_at(img, w, h, sx, sy);
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Bin centre for an angle already folded into [0, π).
fn bin_of(theta: f64) -> f64 {
    if !(PI / 8.0..7.0 * PI / 8.0).contains(&theta) {
        0.0
    } else if theta < 3.0 * PI / 8.0 {
        PI / 4.0
    } else if theta < 5.0 * PI / 8.0 {
        PI / 2.0
    } else {
        3.0 * PI / 4.0
    }
}

pub fn reference(frame: &GrayFrame) -> Reference {
    let (w, h) = (frame.width(), frame.height());
    let img: Vec<f64> = frame.pixels().iter().map(|&p| p as f64).collect();
    let blur159 = correlate(&img, w, h, &K_BLUR);
    let dx159 = correlate(&blur159, w, h, &K_DX);
    let dy159 = correlate(&blur159, w, h, &K_DY);

    let mut mag = vec![0.0; w * h];
    let mut bin = vec![0.0; w * h];
    for i in 0..w * h {
        let (gx, gy) = (dx159[i], dy159[i]);
        mag[i] = (gx * gx + gy * gy).sqrt() / 159.0;
        let theta = if gx == 0.0 && gy == 0.0 {
            0.0
        } else {
            let a = gy.atan2(gx);
            let a = if a < 0.0 { a + PI } else { a };
            if a >= PI {
                a - PI
            } else {
                a
            }
        };
        bin[i] = bin_of(theta);
    }

    // Rows grow downward while angles grow toward the top of the image.
    let m = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let b = bin[i];
            let (n1, n2) = if b == 0.0 {
                (m(x - 1, y), m(x + 1, y))
            } else if b == PI / 2.0 {
                (m(x, y - 1), m(x, y + 1))
            } else if b == PI / 4.0 {
                (m(x + 1, y - 1), m(x - 1, y + 1))
            } else {
                (m(x - 1, y - 1), m(x + 1, y + 1))
            };
            if mag[i] >= n1 && mag[i] >= n2 {
                thin[i] = mag[i];
            }
        }
    }

    let n = (w * h) as f64;
    let mut sum = 0.0;
    for v in &thin {
        sum += v;
    }
    let mu = sum / n;
    let mut ss = 0.0;
    for v in &thin {
        ss += (v - mu) * (v - mu);
    }
    let sigma = (ss / n).sqrt();
    let (t_high, t_low) = (mu + 0.5 * sigma, mu - 0.5 * sigma);

    // Algorithm 1. `None` is NA. The second loop consults the first-pass
    // marks; values equal to a threshold are treated as intermediate.
    let mut e: Vec<Option<u8>> = vec![None; w * h];
    for x in 0..w {
        for y in 0..h {
            let v = thin[y * w + x];
            e[y * w + x] = if v < t_low {
                Some(0)
            } else if v > t_high {
                Some(1)
            } else {
                None
            };
        }
    }
    let first = e.clone();
    for x in 0..w as i64 {
        for y in 0..h as i64 {
            let i = y as usize * w + x as usize;
            let v = thin[i];
            if t_low <= v && v <= t_high {
                let mut linked = false;
                for y0 in y - 1..=y + 1 {
                    for x0 in x - 1..=x + 1 {
                        if (x0, y0) == (x, y)
                            || x0 < 0
                            || y0 < 0
                            || x0 >= w as i64
                            || y0 >= h as i64
                        {
                            continue;
                        }
                        linked |= first[y0 as usize * w + x0 as usize] == Some(1);
                    }
                }
                e[i] = Some(u8::from(linked));
            }
        }
    }
    let edges = e
        .into_iter()
        .map(|v| v.expect("every pixel decided"))
        .collect();

    Reference {
        w,
        h,
        blur159,
        dx159,
        dy159,
        mag,
        bin,
        thin,
        t_low,
        t_high,
        edges,
    }
}

pub fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayFrame {
    let px = (0..w * h).map(|_| rng.random::<u8>()).collect();
    GrayFrame::new(w, h, px, 0, 0.0).unwrap()
}

/// Random rectangles on a flat background: long straight edges and many
/// exactly tied magnitudes.
pub fn blocky_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayFrame {
    let mut px = vec![rng.random::<u8>(); w * h];
    for _ in 0..rng.random_range(1..6) {
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0..w), rng.random_range(y0..h));
        let v = rng.random::<u8>();
        for y in y0..=y1 {
            px[y * w + x0..=y * w + x1].fill(v);
        }
    }
    GrayFrame::new(w, h, px, 0, 0.0).unwrap()
}
