//! Deterministic synthetic breathing videos with analytic ground truth.
//!
//! The scene is a bright torso rectangle on a dark background. Its lower
//! edge and a lattice of small dark dots printed on it (a patterned blanket)
//! move vertically by `d(t) = A·sin(2π·f·τ)`, where `τ` is breathing time:
//! wall time with every pause removed, so the motion freezes during pauses.
//!
//! Each dot is drawn at a whole-pixel offset `⌊φᵢ + d + ½⌋` with its own
//! phase `φᵢ = i/K`. A single edge can only move in one-pixel jumps, but the
//! mean over K evenly phased dots moves in steps of 1/K pixel, so the edge
//! centroid follows `d(t)` closely. The ground-truth ROI covers the dot
//! panel and keeps the torso outline outside it.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::breath::ApneaEvent;
use crate::frame_io::{Fps, FrameError, FrameSequence, GrayFrame};
use crate::motion::WINDOW_LEN;
use crate::roi::{RoiBox, RoiRect};

/// Clearance the edge detector needs around a dot: blur, Sobel, suppression
/// and hysteresis each reach one or two pixels.
const EDGE_REACH: usize = 6;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    #[default]
    Sine,
    /// `A·sign(sin)`: the body jumps between two rest positions.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseSpec {
    pub start_s: f64,
    pub length_s: f64,
}

/// Torso rectangle at rest, in pixels, and its contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TorsoSpec {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub intensity: u8,
    pub background: u8,
}

impl Default for TorsoSpec {
    fn default() -> Self {
        Self {
            x: 40,
            y: 40,
            width: 560,
            height: 380,
            intensity: 200,
            background: 40,
        }
    }
}

/// Dot pattern on the torso.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureSpec {
    /// Distance from the torso outline to the ROI.
    pub inset: usize,
    pub spacing_x: usize,
    pub spacing_y: usize,
    pub dot_size: usize,
    pub intensity: u8,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            inset: 12,
            spacing_x: 10,
            spacing_y: 11,
            dot_size: 2,
            intensity: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub duration_s: f64,
    pub breaths_per_min: f64,
    pub amplitude_px: f64,
    pub waveform: Waveform,
    pub torso: TorsoSpec,
    pub texture: TextureSpec,
    pub pauses: Vec<PauseSpec>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            fps: 24,
            duration_s: 60.0,
            breaths_per_min: 20.0,
            amplitude_px: 3.0,
            waveform: Waveform::Sine,
            torso: TorsoSpec::default(),
            texture: TextureSpec::default(),
            pauses: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// A 1280×720 scene with the torso scaled up.
    pub fn hd720() -> Self {
        Self {
            width: 1280,
            height: 720,
            torso: TorsoSpec {
                x: 240,
                y: 80,
                width: 800,
                height: 560,
                ..TorsoSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn breath_hz(&self) -> f64 {
        self.breaths_per_min / 60.0
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.fps as f64).round() as u64
    }

    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.fps as f64
    }

    fn sorted_pauses(&self) -> Vec<PauseSpec> {
        let mut p = self.pauses.clone();
        p.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        p
    }

    /// Whole pixels the lattice can move away from its rest rows.
    fn reach(&self) -> usize {
        self.amplitude_px.ceil() as usize + 1
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.fps == 0 {
            return bad("fps must be positive".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s {} must be positive", self.duration_s));
        }
        if !(self.breaths_per_min > 0.0 && self.breaths_per_min.is_finite()) {
            return bad(format!(
                "breaths_per_min {} must be positive",
                self.breaths_per_min
            ));
        }
        if self.fps as f64 <= 2.0 * self.breath_hz() {
            return bad(format!(
                "fps {} does not exceed twice the breathing rate {} Hz",
                self.fps,
                self.breath_hz()
            ));
        }
        if !(self.amplitude_px >= 1.0 && self.amplitude_px.is_finite()) {
            return bad(format!(
                "amplitude_px {} must be at least 1",
                self.amplitude_px
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        let mut end = 0.0;
        for p in self.sorted_pauses() {
            if !(p.length_s > 0.0 && p.start_s >= 0.0) {
                return bad(format!("pause at {} s has non-positive length", p.start_s));
            }
            if p.start_s + p.length_s > self.duration_s {
                return bad(format!("pause at {} s runs past the end", p.start_s));
            }
            if p.start_s < end {
                return bad(format!(
                    "pause at {} s overlaps the previous one",
                    p.start_s
                ));
            }
            end = p.start_s + p.length_s;
        }
        let t = &self.torso;
        let reach = self.reach();
        if t.x + t.width > self.width || t.y + t.height + reach > self.height {
            return bad("torso does not fit in the frame".into());
        }
        let tx = &self.texture;
        if tx.dot_size == 0 || tx.spacing_x < tx.dot_size + 8 || tx.spacing_y < tx.dot_size + 8 {
            return bad("dot spacing leaves too little room between dots".into());
        }
        if tx.inset < reach + EDGE_REACH {
            return bad(format!(
                "texture inset must be at least {}",
                reach + EDGE_REACH
            ));
        }
        if t.intensity.abs_diff(tx.intensity) < 64 || t.intensity.abs_diff(t.background) < 64 {
            return bad("torso contrast below 64 gray levels".into());
        }
        if self.dot_grid().0.is_empty() || self.dot_grid().1.is_empty() {
            return bad("torso too small for the dot lattice".into());
        }
        Ok(())
    }

    /// Ground-truth region of interest: the torso shrunk by the texture inset.
    pub fn roi(&self) -> RoiRect {
        let t = &self.torso;
        let i = self.texture.inset;
        RoiRect {
            x0: t.x + i,
            y0: t.y + i,
            x1: t.x + t.width - 1 - i,
            y1: t.y + t.height - 1 - i,
        }
    }

    /// Detector-style box whose rounded rectangle is exactly [`Self::roi`].
    pub fn roi_box(&self, frame_index: u64) -> RoiBox {
        let r = self.roi();
        RoiBox {
            frame_index,
            p_c: 0.98,
            b_x: (r.x0 + r.x1) as f64 / 2.0,
            b_y: (r.y0 + r.y1) as f64 / 2.0,
            b_w: (r.x1 - r.x0) as f64,
            b_h: (r.y1 - r.y0) as f64,
        }
    }

    /// Rest-position columns and rows of the dots' top-left corners.
    fn dot_grid(&self) -> (Vec<usize>, Vec<usize>) {
        let r = self.roi();
        let tx = &self.texture;
        let m = EDGE_REACH;
        let reach = self.reach();
        let xs = (r.x0 + m..)
            .step_by(tx.spacing_x)
            .take_while(|&x| x + tx.dot_size + m <= r.x1 + 1)
            .collect();
        let ys = (r.y0 + m + reach..)
            .step_by(tx.spacing_y)
            .take_while(|&y| y + tx.dot_size + reach + m <= r.y1 + 1)
            .collect();
        (xs, ys)
    }

    pub fn dot_count(&self) -> usize {
        let (xs, ys) = self.dot_grid();
        xs.len() * ys.len()
    }

    /// Breathing time elapsed at wall time `t_s`.
    pub fn breathing_time(&self, t_s: f64) -> f64 {
        let paused: f64 = self
            .pauses
            .iter()
            .map(|p| (t_s - p.start_s).clamp(0.0, p.length_s))
            .sum();
        t_s - paused
    }

    /// Wall time at which breathing time `tau_s` is reached; an instant that
    /// coincides with a pause start maps to the start.
    pub fn wall_time(&self, tau_s: f64) -> f64 {
        let mut t = tau_s;
        for p in self.sorted_pauses() {
            if t > p.start_s {
                t += p.length_s;
            }
        }
        t
    }

    /// Vertical displacement in pixels at wall time `t_s`; positive is down.
    pub fn displacement(&self, t_s: f64) -> f64 {
        let s = (2.0 * PI * self.breath_hz() * self.breathing_time(t_s)).sin();
        match self.waveform {
            Waveform::Sine => self.amplitude_px * s,
            Waveform::Square => {
                if s >= 0.0 {
                    self.amplitude_px
                } else {
                    -self.amplitude_px
                }
            }
        }
    }
}

/// One breathing cycle between consecutive displacement minima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fps: u32,
    pub frame_count: u64,
    pub frame_period_ms: f64,
    pub duration_ms: f64,
    pub breaths_per_min: f64,
    /// Instants of fastest downward motion, one per breath.
    pub peak_times_ms: Vec<f64>,
    /// Complete cycles the tracker can observe, excluding any that contain
    /// a pause.
    pub cycles: Vec<Cycle>,
    /// Every injected breathing pause, whether or not it is long enough to
    /// be apnea.
    pub pauses: Vec<ApneaEvent>,
    pub roi: RoiRect,
    pub roi_box: RoiBox,
}

impl GroundTruth {
    pub fn from_config(cfg: &SynthConfig) -> Self {
        let f = cfg.breath_hz();
        let frame_count = cfg.frame_count();
        let period_ms = cfg.frame_period_ms();
        let duration_ms = frame_count as f64 * period_ms;
        let active_s = cfg.breathing_time(frame_count as f64 / cfg.fps as f64);

        let peak_times_ms = (0..)
            .map(|k| k as f64 / f)
            .take_while(|&tau| tau < active_s)
            .map(|tau| cfg.wall_time(tau) * 1000.0)
            .filter(|&t| t < duration_ms)
            .collect();

        // The first smoothed sample appears at frame WINDOW_LEN, and a peak
        // needs one sample on each side.
        let first_ms = (WINDOW_LEN + 1) as f64 * period_ms;
        let last_ms = frame_count.saturating_sub(1) as f64 * period_ms;
        let mut cycles = Vec::new();
        let mut k = -1i64;
        loop {
            let (a, b) = ((k as f64 + 0.75) / f, (k as f64 + 1.75) / f);
            k += 1;
            if a < 0.0 {
                continue;
            }
            let (start, end) = (cfg.wall_time(a) * 1000.0, cfg.wall_time(b) * 1000.0);
            if end > last_ms {
                break;
            }
            let paused = (end - start - (b - a) * 1000.0).abs() > 1e-6;
            if start >= first_ms && !paused {
                cycles.push(Cycle {
                    start_ms: start,
                    end_ms: end,
                });
            }
        }

        let pauses = cfg
            .sorted_pauses()
            .iter()
            .map(|p| ApneaEvent {
                start_ms: p.start_s * 1000.0,
                length_ms: p.length_s * 1000.0,
            })
            .collect();

        Self {
            fps: cfg.fps,
            frame_count,
            frame_period_ms: period_ms,
            duration_ms,
            breaths_per_min: cfg.breaths_per_min,
            peak_times_ms,
            cycles,
            pauses,
            roi: cfg.roi(),
            roi_box: cfg.roi_box(0),
        }
    }

    pub fn peak_intervals_ms(&self) -> Vec<f64> {
        self.peak_times_ms.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Renders frames of a validated config.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    cfg: SynthConfig,
    fps: Fps,
    dots: Vec<(usize, usize)>,
    noise: Option<Normal<f64>>,
}

impl Synthesizer {
    pub fn new(cfg: SynthConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        let fps = Fps::integer(cfg.fps)?;
        let (xs, ys) = cfg.dot_grid();
        let dots = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .collect();
        let noise = (cfg.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, cfg.noise_sigma).expect("sigma validated"));
        Ok(Self {
            cfg,
            fps,
            dots,
            noise,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn frame_count(&self) -> u64 {
        self.cfg.frame_count()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_config(&self.cfg)
    }

    /// Whole-pixel row offset of every dot at frame `index`, in lattice order.
    pub fn dot_offsets(&self, index: u64) -> Vec<i64> {
        let d = self.cfg.displacement(index as f64 / self.cfg.fps as f64);
        let k = self.dots.len() as f64;
        (0..self.dots.len())
            .map(|i| (i as f64 / k + d + 0.5).floor() as i64)
            .collect()
    }

    pub fn render(&self, index: u64) -> GrayFrame {
        let c = &self.cfg;
        let (w, h) = (c.width, c.height);
        let t = &c.torso;
        let d = c.displacement(index as f64 / c.fps as f64);
        let mut px = vec![t.background; w * h];

        let bottom = (t.y as f64 + t.height as f64 + d + 0.5).floor() as usize;
        for row in px[t.y * w..bottom * w].chunks_exact_mut(w) {
            row[t.x..t.x + t.width].fill(t.intensity);
        }

        let ds = c.texture.dot_size;
        for (&(x, y), off) in self.dots.iter().zip(self.dot_offsets(index)) {
            let y = (y as i64 + off) as usize;
            for row in px[y * w..(y + ds) * w].chunks_exact_mut(w) {
                row[x..x + ds].fill(c.texture.intensity);
            }
        }

        if let Some(noise) = &self.noise {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            rng.set_stream(index);
            for p in px.iter_mut() {
                *p = (*p as f64 + noise.sample(&mut rng))
                    .round()
                    .clamp(0.0, 255.0) as u8;
            }
        }

        let ts = self.fps.timestamp_ms(index);
        GrayFrame::new(w, h, px, index, ts).expect("validated dimensions")
    }

    pub fn frames(&self) -> impl Iterator<Item = GrayFrame> + '_ {
        (0..self.frame_count()).map(move |i| self.render(i))
    }
}

/// Renders the whole sequence in memory, frames in parallel.
pub fn generate(cfg: &SynthConfig) -> Result<(FrameSequence, GroundTruth), SynthError> {
    let synth = Synthesizer::new(cfg.clone())?;
    let frames: Vec<GrayFrame> = (0..synth.frame_count())
        .into_par_iter()
        .map(|i| synth.render(i))
        .collect();
    let seq = FrameSequence::new(frames, synth.fps())?;
    Ok((seq, synth.ground_truth()))
}
