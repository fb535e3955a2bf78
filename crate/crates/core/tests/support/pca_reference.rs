//! Power-iteration reference for the principal axis of a velocity window.

#![allow(dead_code)]

/// Two-pass scatter matrix, written independently of the library.
pub fn scatter(vs: &[(f64, f64)]) -> [[f64; 2]; 2] {
    let n = vs.len() as f64;
    let mx = vs.iter().map(|v| v.0).sum::<f64>() / n;
    let my = vs.iter().map(|v| v.1).sum::<f64>() / n;
    let mut m = [[0.0; 2]; 2];
    for &(x, y) in vs {
        let d = [x - mx, y - my];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] += d[r] * d[c];
            }
        }
    }
    m
}

pub fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Dominant eigenvector of a symmetric PSD matrix from `M^(2^k)`, renormalised
/// after every squaring so even tiny eigenvalue gaps separate.
pub fn power_iteration(m: [[f64; 2]; 2]) -> (f64, f64) {
    let mut p = m;
    for _ in 0..64 {
        p = mat_mul(&p, &p);
        let norm = p.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        p.iter_mut().flatten().for_each(|v| *v /= norm);
    }
    // Polish with plain iterations from the stronger column.
    let c0 = (p[0][0], p[1][0]);
    let c1 = (p[0][1], p[1][1]);
    let mut v = if c0.0.hypot(c0.1) >= c1.0.hypot(c1.1) {
        c0
    } else {
        c1
    };
    for _ in 0..50 {
        let w = (m[0][0] * v.0 + m[0][1] * v.1, m[1][0] * v.0 + m[1][1] * v.1);
        let n = w.0.hypot(w.1);
        v = (w.0 / n, w.1 / n);
    }
    v
}

pub fn eigenvalues(m: &[[f64; 2]; 2]) -> (f64, f64) {
    let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
    let mid = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mid + r, mid - r)
}

/// Angle between two lines through the origin.
pub fn line_angle(u: (f64, f64), v: (f64, f64)) -> f64 {
    let cross = (u.0 * v.1 - u.1 * v.0).abs();
    let dot = (u.0 * v.0 + u.1 * v.1).abs();
    cross.atan2(dot)
}
