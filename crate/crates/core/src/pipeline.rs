//! End-to-end analysis: frames → edges → centroid motion → breaths → apnea
//! windows.
//!
//! Edge detection is a pure per-frame function and runs on a thread pool in
//! chunks; everything after it is a single ordered pass, so results do not
//! depend on the number of threads.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::breath::{
    apnea_events, breath_intervals, ApneaEvent, ApneaMonitor, ApneaReport, BreathReport, PeakRule,
    StreamingPeaks, WindowScore, DEFAULT_PAUSE_MS, DEFAULT_WINDOW_MS,
};
use crate::edge_detect::{detect_edges_with, EdgeError, HysteresisMode};
use crate::frame_io::{Fps, FrameError, GrayFrame};
use crate::motion::{centroid, Centroid, MotionError, MotionTracker, TrackPoint};
use crate::roi::{RoiError, RoiRect, RoiSource};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("frame {frame}: {source}")]
    Roi { frame: u64, source: RoiError },
    #[error("frame {frame}: roi {rect} does not fit the {width}x{height} frame")]
    RoiOutsideFrame {
        frame: u64,
        rect: RoiRect,
        width: usize,
        height: usize,
    },
    #[error("frame {frame}: {source}")]
    Edge { frame: u64, source: EdgeError },
    #[error("frame {frame}: {source}")]
    Motion { frame: u64, source: MotionError },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("writing {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub window_ms: f64,
    pub pause_ms: f64,
    pub peak_rule: PeakRule,
    /// Detect edges on the whole frame instead of the ROI crop.
    pub full_frame_edges: bool,
    pub hysteresis: HysteresisMode,
    pub jobs: usize,
    /// Keep every [`TrackPoint`] for `signal.csv`.
    pub keep_signal: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            window_ms: DEFAULT_WINDOW_MS,
            pause_ms: DEFAULT_PAUSE_MS,
            peak_rule: PeakRule::LocalMax,
            full_frame_edges: false,
            hysteresis: HysteresisMode::SinglePass,
            jobs: 1,
            keep_signal: false,
        }
    }
}

impl AnalyzeOptions {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.pause_ms > 0.0 && self.pause_ms.is_finite()) {
            return Err(PipelineError::Config(format!(
                "pause_ms must be positive, got {}",
                self.pause_ms
            )));
        }
        if !(self.window_ms > self.pause_ms && self.window_ms.is_finite()) {
            return Err(PipelineError::Config(format!(
                "window_ms ({}) must exceed pause_ms ({})",
                self.window_ms, self.pause_ms
            )));
        }
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Consecutive frames that share one ROI (or none).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSpan {
    pub first_frame: u64,
    pub last_frame: u64,
    pub rect: Option<RoiRect>,
}

/// Everything `analyze` produces. Serialized as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub fps: f64,
    pub frame_period_ms: f64,
    pub frame_count: u64,
    pub duration_ms: f64,
    pub peak_frames: Vec<u64>,
    pub breaths: BreathReport,
    pub apnea_events: Vec<ApneaEvent>,
    pub apnea: ApneaReport,
    pub rois: Vec<RoiSpan>,
    #[serde(skip)]
    pub signal: Vec<TrackPoint>,
}

impl Analysis {
    /// Frame-by-frame ROI, `None` where no detection was available.
    pub fn roi_per_frame(&self) -> Vec<Option<RoiRect>> {
        let mut out = vec![None; self.frame_count as usize];
        for span in &self.rois {
            for f in span.first_frame..=span.last_frame {
                if let Some(slot) = out.get_mut(f as usize) {
                    *slot = span.rect;
                }
            }
        }
        out
    }
}

/// Edge centroid of one frame inside `roi`.
pub fn observe_frame(
    frame: &GrayFrame,
    roi: &RoiRect,
    full_frame_edges: bool,
    mode: HysteresisMode,
) -> Result<Centroid, PipelineError> {
    let index = frame.frame_index();
    if !roi.fits(frame.width(), frame.height()) {
        return Err(PipelineError::RoiOutsideFrame {
            frame: index,
            rect: *roi,
            width: frame.width(),
            height: frame.height(),
        });
    }
    let edge_err = |source| PipelineError::Edge {
        frame: index,
        source,
    };
    let edges = if full_frame_edges {
        detect_edges_with(frame, mode).map_err(edge_err)?
    } else {
        let crop = frame.crop(roi.x0, roi.y0, roi.x1, roi.y1)?;
        detect_edges_with(&crop, mode)
            .map_err(edge_err)?
            .with_origin(roi.x0, roi.y0)
    };
    centroid(&edges, roi, index).map_err(|source| PipelineError::Motion {
        frame: index,
        source,
    })
}

/// The ordered half of the pipeline: consumes per-frame centroids and
/// emits apnea windows as they close.
#[derive(Debug)]
pub struct Analyzer {
    fps: Fps,
    opts: AnalyzeOptions,
    tracker: MotionTracker,
    peaks: StreamingPeaks<u64>,
    monitor: ApneaMonitor,
    peak_frames: Vec<u64>,
    windows: Vec<WindowScore>,
    rois: Vec<RoiSpan>,
    signal: Vec<TrackPoint>,
    frame_count: u64,
}

impl Analyzer {
    pub fn new(fps: Fps, opts: AnalyzeOptions) -> Self {
        Self {
            fps,
            tracker: MotionTracker::new(),
            peaks: StreamingPeaks::new(opts.peak_rule),
            monitor: ApneaMonitor::new(0.0, opts.window_ms, opts.pause_ms),
            opts,
            peak_frames: Vec::new(),
            windows: Vec::new(),
            rois: Vec::new(),
            signal: Vec::new(),
            frame_count: 0,
        }
    }

    fn record_roi(&mut self, frame: u64, rect: Option<RoiRect>) {
        match self.rois.last_mut() {
            Some(span) if span.rect == rect && span.last_frame + 1 == frame => {
                span.last_frame = frame
            }
            _ => self.rois.push(RoiSpan {
                first_frame: frame,
                last_frame: frame,
                rect,
            }),
        }
    }

    /// Feeds one frame's result; `None` means no ROI, which breaks the motion
    /// history. Returns the windows closed by this frame.
    pub fn push(
        &mut self,
        frame: u64,
        roi: Option<RoiRect>,
        c: Option<Centroid>,
    ) -> Vec<WindowScore> {
        self.frame_count = self.frame_count.max(frame + 1);
        self.record_roi(frame, roi);
        let Some(c) = c else {
            self.tracker.reset();
            self.peaks = StreamingPeaks::new(self.opts.peak_rule);
            return Vec::new();
        };
        let point = self.tracker.push(c);
        if self.opts.keep_signal {
            self.signal.push(point);
        }
        let Some(s1) = point.s1 else {
            self.peaks = StreamingPeaks::new(self.opts.peak_rule);
            return Vec::new();
        };
        let Some(peak) = self.peaks.push(frame, s1) else {
            return Vec::new();
        };
        self.peak_frames.push(peak);
        let closed = self.monitor.push_peak(self.fps.timestamp_ms(peak));
        self.windows.extend_from_slice(&closed);
        closed
    }

    pub fn windows_closed(&self) -> usize {
        self.windows.len()
    }

    /// Closes the remaining windows and assembles the reports.
    pub fn finish(mut self) -> (Analysis, Vec<WindowScore>) {
        let period = self.fps.frame_period_ms();
        let duration_ms = self.frame_count as f64 * period;
        let closed = self.monitor.finish(duration_ms);
        self.windows.extend_from_slice(&closed);
        let breaths = breath_intervals(&self.peak_frames, period);
        let events = apnea_events(&breaths.peak_times_ms, self.opts.pause_ms);
        let analysis = Analysis {
            fps: self.fps.as_f64(),
            frame_period_ms: period,
            frame_count: self.frame_count,
            duration_ms,
            peak_frames: self.peak_frames,
            breaths,
            apnea_events: events,
            apnea: ApneaReport {
                window_ms: self.opts.window_ms,
                pause_ms: self.opts.pause_ms,
                windows: self.windows,
            },
            rois: self.rois,
            signal: self.signal,
        };
        (analysis, closed)
    }
}

/// Runs the whole pipeline over `frames`. `on_window` sees each window, with
/// its zero-based number, as soon as it closes.
pub fn analyze<I, F>(
    frames: I,
    fps: Fps,
    roi: &RoiSource,
    opts: &AnalyzeOptions,
    mut on_window: F,
) -> Result<Analysis, PipelineError>
where
    I: IntoIterator<Item = Result<GrayFrame, FrameError>>,
    F: FnMut(usize, &WindowScore),
{
    opts.validate()?;
    let pool = if opts.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()
                .map_err(|e| PipelineError::ThreadPool(e.to_string()))?,
        )
    } else {
        None
    };
    let chunk_len = opts.jobs * 2;
    let mut analyzer = Analyzer::new(fps, opts.clone());
    let mut frames = frames.into_iter();
    let mut emit = |analyzer: &Analyzer, closed: Vec<WindowScore>| {
        let first = analyzer.windows_closed() - closed.len();
        for (i, w) in closed.iter().enumerate() {
            on_window(first + i, w);
        }
    };

    loop {
        let mut chunk = Vec::with_capacity(chunk_len);
        for item in frames.by_ref().take(chunk_len) {
            let frame = item?;
            let index = frame.frame_index();
            let rect = roi
                .rect_for(index, frame.width(), frame.height())
                .map_err(|source| PipelineError::Roi {
                    frame: index,
                    source,
                })?;
            chunk.push((frame, rect));
        }
        if chunk.is_empty() {
            break;
        }
        let work = |(frame, rect): &(GrayFrame, Option<RoiRect>)| {
            rect.as_ref()
                .map(|r| observe_frame(frame, r, opts.full_frame_edges, opts.hysteresis))
                .transpose()
        };
        let results: Vec<Result<Option<Centroid>, PipelineError>> = match &pool {
            Some(pool) => {
                use rayon::prelude::*;
                pool.install(|| chunk.par_iter().map(work).collect())
            }
            None => chunk.iter().map(work).collect(),
        };
        for ((frame, rect), result) in chunk.iter().zip(results) {
            let closed = analyzer.push(frame.frame_index(), *rect, result?);
            emit(&analyzer, closed);
        }
    }

    let (analysis, closed) = analyzer.finish();
    let first = analysis.apnea.windows.len() - closed.len();
    for (i, w) in closed.iter().enumerate() {
        on_window(first + i, w);
    }
    Ok(analysis)
}

/// `frame,cx,cy,vx,vy,ux,uy,s0,s1`; fields not yet available are empty.
pub fn signal_csv(points: &[TrackPoint]) -> String {
    let opt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
    let mut out = String::from("frame,cx,cy,vx,vy,ux,uy,s0,s1\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.frame_index,
            p.centroid.x,
            p.centroid.y,
            opt(p.velocity.map(|v| v.vx)),
            opt(p.velocity.map(|v| v.vy)),
            opt(p.direction.map(|u| u.ux)),
            opt(p.direction.map(|u| u.uy)),
            opt(p.s0),
            opt(p.s1),
        ));
    }
    out
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(contents))
        .map_err(|source| PipelineError::Output {
            path: path.display().to_string(),
            source,
        })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s.into_bytes()
}

/// Writes `intervals.csv`, `apnea.json` and `run.json`, plus `signal.csv`
/// when the signal was kept.
pub fn write_reports(
    dir: &Path,
    analysis: &Analysis,
    dump_signal: bool,
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Output {
        path: dir.display().to_string(),
        source,
    })?;
    write_file(
        &dir.join("intervals.csv"),
        analysis.breaths.to_csv().as_bytes(),
    )?;
    write_file(&dir.join("apnea.json"), &to_json(&analysis.apnea))?;
    write_file(&dir.join("run.json"), &to_json(analysis))?;
    if dump_signal {
        write_file(
            &dir.join("signal.csv"),
            signal_csv(&analysis.signal).as_bytes(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{SynthConfig, Synthesizer, TorsoSpec};

    fn small_synth() -> Synthesizer {
        Synthesizer::new(SynthConfig {
            width: 200,
            height: 160,
            fps: 12,
            duration_s: 12.0,
            breaths_per_min: 30.0,
            torso: TorsoSpec {
                x: 10,
                y: 10,
                width: 180,
                height: 130,
                ..TorsoSpec::default()
            },
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn run(s: &Synthesizer, opts: &AnalyzeOptions) -> Analysis {
        let roi = RoiSource::Fixed(s.config().roi());
        analyze(s.frames().map(Ok), s.fps(), &roi, opts, |_, _| {}).unwrap()
    }

    #[test]
    fn rejects_window_not_above_pause() {
        let opts = AnalyzeOptions {
            window_ms: 10_000.0,
            pause_ms: 15_000.0,
            ..AnalyzeOptions::default()
        };
        assert!(matches!(opts.validate(), Err(PipelineError::Config(_))));
        assert!(AnalyzeOptions {
            jobs: 0,
            ..AnalyzeOptions::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn recovers_breathing_period() {
        let s = small_synth();
        let a = run(&s, &AnalyzeOptions::default());
        assert!(a.breaths.intervals.len() >= 3);
        for iv in &a.breaths.intervals {
            assert!(
                (iv.interval_ms - 2000.0).abs() <= a.frame_period_ms + 1e-9,
                "{iv:?}"
            );
        }
        assert_eq!(a.apnea.max_severity(), 0);
    }

    #[test]
    fn crop_and_full_frame_agree() {
        let s = small_synth();
        let crop = run(&s, &AnalyzeOptions::default());
        let full = run(
            &s,
            &AnalyzeOptions {
                full_frame_edges: true,
                ..AnalyzeOptions::default()
            },
        );
        assert_eq!(crop.peak_frames, full.peak_frames);
    }

    #[test]
    fn missing_roi_breaks_history() {
        let mut a = Analyzer::new(Fps::integer(10).unwrap(), AnalyzeOptions::default());
        let rect = RoiRect::new(0, 0, 9, 9).unwrap();
        for f in 0..5 {
            a.push(
                f,
                Some(rect),
                Some(Centroid {
                    x: 1.0,
                    y: f as f64,
                    frame_index: f,
                }),
            );
        }
        a.push(5, None, None);
        let (analysis, _) = a.finish();
        assert_eq!(analysis.frame_count, 6);
        assert_eq!(analysis.rois.len(), 2);
        assert_eq!(analysis.roi_per_frame()[5], None);
    }

    #[test]
    fn signal_csv_leaves_missing_fields_empty() {
        let p = TrackPoint {
            frame_index: 3,
            centroid: Centroid {
                x: 1.5,
                y: 2.0,
                frame_index: 3,
            },
            velocity: None,
            direction: None,
            s0: None,
            s1: None,
        };
        assert_eq!(signal_csv(&[p]).lines().nth(1), Some("3,1.5,2,,,,,,"));
    }
}
