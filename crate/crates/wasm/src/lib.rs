//! WebAssembly bindings for the single-page demo in `www/`.
//!
//! The page renders a synthetic breathing scene, shows its edge map, runs
//! the full analysis on the clip and scores hand-entered breath times.

use apnea_core::breath::{apnea_events, score_windows, ApneaEvent, WindowScore};
use apnea_core::edge_detect::detect_edges;
use apnea_core::pipeline::{analyze, AnalyzeOptions};
use apnea_core::roi::RoiSource;
use apnea_core::synth::{PauseSpec, SynthConfig, Synthesizer, TorsoSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const PAUSE_START_S: f64 = 12.0;

/// A small synthetic clip the page can scrub through and analyze.
#[wasm_bindgen]
pub struct Scene {
    synth: Synthesizer,
}

#[derive(Debug, Serialize)]
struct ClipAnalysis {
    fps: f64,
    frames: u64,
    /// `[frame, s1]` for every frame with a breathing sample.
    signal: Vec<(u64, f64)>,
    peaks: Vec<u64>,
    intervals_ms: Vec<f64>,
    events: Vec<ApneaEvent>,
    windows: Vec<WindowScore>,
}

#[derive(Debug, Serialize)]
struct ScoreResult {
    events: Vec<ApneaEvent>,
    windows: Vec<WindowScore>,
}

impl Scene {
    fn build(
        breaths_per_min: f64,
        amplitude_px: f64,
        noise_sigma: f64,
        pause_s: f64,
        seed: u64,
    ) -> Result<Scene, String> {
        let duration_s = 50.0;
        let pauses = if pause_s > 0.0 {
            vec![PauseSpec {
                start_s: PAUSE_START_S,
                length_s: pause_s,
            }]
        } else {
            Vec::new()
        };
        let cfg = SynthConfig {
            width: 320,
            height: 240,
            fps: 12,
            duration_s,
            breaths_per_min,
            amplitude_px,
            torso: TorsoSpec {
                x: 20,
                y: 20,
                width: 280,
                height: 190,
                ..TorsoSpec::default()
            },
            pauses,
            noise_sigma,
            seed,
            ..SynthConfig::default()
        };
        let synth = Synthesizer::new(cfg).map_err(|e| e.to_string())?;
        Ok(Scene { synth })
    }

    fn gray_to_rgba(gray: &[u8]) -> Vec<u8> {
        gray.iter().flat_map(|&g| [g, g, g, 255]).collect()
    }

    fn edges_rgba_inner(&self, index: u32) -> Result<Vec<u8>, String> {
        let frame = self.synth.render(index as u64);
        let edges = detect_edges(&frame).map_err(|e| e.to_string())?;
        let roi = self.synth.config().roi();
        let w = frame.width();
        let mut rgba = Vec::with_capacity(w * frame.height() * 4);
        for (i, &b) in edges.bits().iter().enumerate() {
            let (x, y) = (i % w, i / w);
            let on_roi = (x == roi.x0 || x == roi.x1) && (roi.y0..=roi.y1).contains(&y)
                || (y == roi.y0 || y == roi.y1) && (roi.x0..=roi.x1).contains(&x);
            rgba.extend_from_slice(match (on_roi, b) {
                (true, _) => &[230, 80, 60, 255],
                (false, 1) => &[255, 255, 255, 255],
                _ => &[0, 0, 0, 255],
            });
        }
        Ok(rgba)
    }

    fn analyze_inner(&self) -> Result<String, String> {
        let s = &self.synth;
        let opts = AnalyzeOptions {
            keep_signal: true,
            ..AnalyzeOptions::default()
        };
        let roi = RoiSource::Fixed(s.config().roi());
        let a = analyze(s.frames().map(Ok), s.fps(), &roi, &opts, |_, _| {})
            .map_err(|e| e.to_string())?;
        let out = ClipAnalysis {
            fps: a.fps,
            frames: a.frame_count,
            signal: a
                .signal
                .iter()
                .filter_map(|p| p.s1.map(|v| (p.frame_index, v)))
                .collect(),
            peaks: a.peak_frames.clone(),
            intervals_ms: a.breaths.intervals.iter().map(|i| i.interval_ms).collect(),
            events: a.apnea_events.clone(),
            windows: a.apnea.windows.clone(),
        };
        serde_json::to_string(&out).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
impl Scene {
    /// A 50 s, 12 fps, 320×240 clip. `pause_s > 0` inserts one breathing
    /// pause of that length 12 s in.
    #[wasm_bindgen(constructor)]
    pub fn new(
        breaths_per_min: f64,
        amplitude_px: f64,
        noise_sigma: f64,
        pause_s: f64,
        seed: u32,
    ) -> Result<Scene, JsError> {
        Scene::build(
            breaths_per_min,
            amplitude_px,
            noise_sigma,
            pause_s,
            seed as u64,
        )
        .map_err(|e| JsError::new(&e))
    }

    pub fn width(&self) -> u32 {
        self.synth.config().width as u32
    }

    pub fn height(&self) -> u32 {
        self.synth.config().height as u32
    }

    #[wasm_bindgen(js_name = frameCount)]
    pub fn frame_count(&self) -> u32 {
        self.synth.frame_count() as u32
    }

    pub fn fps(&self) -> u32 {
        self.synth.config().fps
    }

    /// Frame pixels as RGBA, ready for `ImageData`.
    #[wasm_bindgen(js_name = frameRgba)]
    pub fn frame_rgba(&self, index: u32) -> Vec<u8> {
        Scene::gray_to_rgba(self.synth.render(index as u64).pixels())
    }

    /// Full-frame edge map as RGBA with the ROI outlined.
    #[wasm_bindgen(js_name = edgesRgba)]
    pub fn edges_rgba(&self, index: u32) -> Result<Vec<u8>, JsError> {
        self.edges_rgba_inner(index).map_err(|e| JsError::new(&e))
    }

    /// Runs the whole pipeline over the clip; returns JSON with the
    /// breathing signal, peaks, intervals and apnea windows.
    pub fn analyze(&self) -> Result<String, JsError> {
        self.analyze_inner().map_err(|e| JsError::new(&e))
    }
}

fn score_inner(peak_times_ms: &[f64], window_ms: f64, pause_ms: f64) -> Result<String, String> {
    if !(window_ms > pause_ms && pause_ms > 0.0) {
        return Err("window must be longer than the pause threshold".into());
    }
    if peak_times_ms.windows(2).any(|w| w[1] < w[0]) {
        return Err("breath times must be ascending".into());
    }
    let end = peak_times_ms.last().copied().unwrap_or(0.0) + 1.0;
    let report = score_windows(peak_times_ms, 0.0, end, window_ms, pause_ms);
    let out = ScoreResult {
        events: apnea_events(peak_times_ms, pause_ms),
        windows: report.windows,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Scores breath times (ms, ascending) into apnea windows; returns JSON.
#[wasm_bindgen(js_name = scoreBreaths)]
pub fn score_breaths(
    peak_times_ms: Vec<f64>,
    window_ms: f64,
    pause_ms: f64,
) -> Result<String, JsError> {
    score_inner(&peak_times_ms, window_ms, pause_ms).map_err(|e| JsError::new(&e))
}
