//! Principal direction against a power-iteration oracle.

use apnea_core::motion::{
    principal_axes, principal_direction, Velocity, VelocityWindow, WINDOW_LEN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[path = "support/pca_reference.rs"]
mod pca_reference;

use pca_reference::{eigenvalues, line_angle, power_iteration, scatter};

fn window(vs: &[(f64, f64)]) -> VelocityWindow {
    vs.iter().map(|&(vx, vy)| Velocity { vx, vy }).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn random_windows_agree_with_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 1000 {
        let phi = rng.random_range(0.0..std::f64::consts::PI);
        let (s, c) = phi.sin_cos();
        let major = rng.random_range(0.05..3.0);
        let minor = major * rng.random_range(0.0..1.0);
        let offset = (normal(&mut rng), normal(&mut rng));
        let vs: Vec<(f64, f64)> = (0..WINDOW_LEN)
            .map(|_| {
                let (a, b) = (major * normal(&mut rng), minor * normal(&mut rng));
                (offset.0 + a * c - b * s, offset.1 + a * s + b * c)
            })
            .collect();
        let m = scatter(&vs);
        let (l1, l2) = eigenvalues(&m);
        if l1 - l2 < 1e-6 {
            continue;
        }
        let oracle = power_iteration(m);
        let u = principal_direction(&window(&vs), None).unwrap();
        let err = line_angle((u.ux, u.uy), oracle);
        worst = worst.max(err);
        assert!(
            err <= 1e-9,
            "window {checked}: {err:e} rad, gap {:e}",
            l1 - l2
        );
        checked += 1;
    }
    assert!(worst <= 1e-9);
}

#[test]
fn eigenvalues_match_trace_and_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let vs: Vec<(f64, f64)> = (0..WINDOW_LEN)
            .map(|_| (normal(&mut rng), normal(&mut rng)))
            .collect();
        let m = scatter(&vs);
        let p = principal_axes(&window(&vs), None).unwrap();
        let trace = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((p.lambda_major + p.lambda_minor - trace).abs() < 1e-9 * trace.max(1.0));
        assert!((p.lambda_major * p.lambda_minor - det).abs() < 1e-9 * (trace * trace).max(1.0));
        assert!(p.lambda_major >= p.lambda_minor);
    }
}

#[test]
fn line_confined_velocities_recover_the_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (s, c) = phi.sin_cos();
        let scale = 10f64.powf(rng.random_range(-3.0..2.0));
        let vs: Vec<(f64, f64)> = (0..WINDOW_LEN)
            .map(|_| {
                let t = scale * normal(&mut rng);
                (t * c, t * s)
            })
            .collect();
        let u = principal_direction(&window(&vs), None).unwrap();
        let cos = u.ux * c + u.uy * s;
        assert!(
            (cos.abs() - 1.0).abs() <= 1e-9,
            "phi {phi}: |cos| = {}",
            cos.abs()
        );
    }
}

#[test]
fn sign_follows_previous_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let vs: Vec<(f64, f64)> = (0..WINDOW_LEN)
            .map(|_| (normal(&mut rng), 3.0 * normal(&mut rng)))
            .collect();
        let w = window(&vs);
        let u = principal_direction(&w, None).unwrap();
        for prev in [
            u,
            apnea_core::motion::UnitDirection {
                ux: -u.ux,
                uy: -u.uy,
            },
        ] {
            let v = principal_direction(&w, Some(prev)).unwrap();
            assert!(v.dot(&prev) >= 0.0);
            assert!((v.ux.hypot(v.uy) - 1.0).abs() < 1e-12);
        }
    }
}
