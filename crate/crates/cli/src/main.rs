use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use apnea_core::breath::{PeakRule, DEFAULT_PAUSE_MS, DEFAULT_WINDOW_MS};
use apnea_core::edge_detect::{detect_edges_staged, EdgeStages, HysteresisMode};
use apnea_core::eval::evaluate;
use apnea_core::frame_io::{
    pgm_frame_name, write_pgm, Fps, FrameSource, GrayFrame, InputFormat, SourceOptions,
};
use apnea_core::pipeline::{analyze, write_reports, Analysis, AnalyzeOptions};
use apnea_core::roi::{RoiRect, RoiSource, RoiTrack, DEFAULT_CONFIDENCE_FLOOR};
use apnea_core::synth::{GroundTruth, SynthConfig, Synthesizer};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

/// Breathing-interval and sleep-apnea analysis from video of a sleeping
/// infant.
#[derive(Debug, Parser)]
#[command(name = "apnea", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Frame rate, e.g. 24 or 30000/1001. Required for PGM directories and
    /// raw input; overrides a Y4M header.
    #[arg(long, global = true)]
    fps: Option<Fps>,
    /// Fixed region of interest `x0,y0,x1,y1` (inclusive pixels).
    #[arg(long, global = true, conflicts_with = "roi_track")]
    roi: Option<RoiRect>,
    /// Per-frame detector boxes: CSV with `frame,pc,bx,by,bw,bh`.
    #[arg(long, global = true)]
    roi_track: Option<PathBuf>,
    /// Boxes below this confidence count as no detection.
    #[arg(long, global = true, default_value_t = DEFAULT_CONFIDENCE_FLOOR)]
    min_confidence: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_WINDOW_MS)]
    window_ms: f64,
    /// Gaps between breaths longer than this are apnea.
    #[arg(long, global = true, default_value_t = DEFAULT_PAUSE_MS)]
    pause_ms: f64,
    /// Use `s[t] > s[t-1] && s[t] <= s[t+1]` as the peak test.
    #[arg(long, global = true)]
    peaks_as_printed: bool,
    /// Run edge detection on the whole frame rather than the ROI crop.
    #[arg(long, global = true)]
    full_frame_edges: bool,
    /// Worker threads for edge detection; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Also write signal.csv with the per-frame motion signal.
    #[arg(long, global = true)]
    dump_signal: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a video and write intervals.csv, apnea.json and run.json.
    Analyze(InputArgs),
    /// Render a synthetic breathing video with ground truth.
    GenSynth {
        /// JSON synth config; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a run.json against a truth.json.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Slack added to each side of a predicted apnea event when matching.
        #[arg(long, default_value_t = 0.0)]
        tolerance_ms: f64,
    },
    /// Write every edge-detector stage of one frame as PGM images.
    DebugEdges {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0)]
        frame: u64,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// PGM directory, .y4m file or raw 8-bit gray file.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Input format; inferred from the path when omitted.
    #[arg(long)]
    format: Option<InputFormat>,
    /// Raw input width.
    #[arg(long)]
    width: Option<usize>,
    /// Raw input height.
    #[arg(long)]
    height: Option<usize>,
}

impl InputArgs {
    fn open(&self, fps: Option<Fps>) -> Result<FrameSource> {
        if !self.input.exists() {
            bail!("input: {} does not exist", self.input.display());
        }
        let format = self
            .format
            .unwrap_or_else(|| InputFormat::infer(&self.input));
        let opts = SourceOptions {
            fps,
            width: self.width,
            height: self.height,
        };
        FrameSource::open(&self.input, format, &opts)
            .with_context(|| format!("opening {}", self.input.display()))
    }
}

fn roi_source(g: &GlobalArgs) -> Result<Option<RoiSource>> {
    match (&g.roi, &g.roi_track) {
        (Some(r), None) => Ok(Some(RoiSource::Fixed(*r))),
        (None, Some(path)) => {
            if !(0.0..=1.0).contains(&g.min_confidence) {
                bail!("min-confidence: {} is outside [0, 1]", g.min_confidence);
            }
            let track = RoiTrack::load(path)?;
            Ok(Some(RoiSource::Track {
                track,
                confidence_floor: g.min_confidence,
            }))
        }
        (None, None) => Ok(None),
        (Some(_), Some(_)) => bail!("roi: give either --roi or --roi-track, not both"),
    }
}

fn run_analyze(g: &GlobalArgs, input: &InputArgs) -> Result<ExitCode> {
    let roi = roi_source(g)?.context("roi: analyze needs --roi or --roi-track")?;
    let opts = AnalyzeOptions {
        window_ms: g.window_ms,
        pause_ms: g.pause_ms,
        peak_rule: if g.peaks_as_printed {
            PeakRule::AsPrinted
        } else {
            PeakRule::LocalMax
        },
        full_frame_edges: g.full_frame_edges,
        hysteresis: HysteresisMode::SinglePass,
        jobs: g.jobs,
        keep_signal: g.dump_signal,
    };
    opts.validate()?;
    let source = input.open(g.fps)?;
    let fps = source.fps();
    let analysis = analyze(source, fps, &roi, &opts, |n, w| {
        if w.severity > 0 {
            eprintln!("APNEA window={n} severity={}", w.severity);
        }
    })?;
    write_reports(&input.out, &analysis, g.dump_signal)?;
    Ok(if analysis.apnea.max_severity() > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_gen_synth(g: &GlobalArgs, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg: SynthConfig = match config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    let synth = Synthesizer::new(cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs.max(1))
        .build()?;
    pool.install(|| {
        (0..synth.frame_count()).into_par_iter().try_for_each(|i| {
            let f = synth.render(i);
            write_pgm(
                &out.join(pgm_frame_name(i)),
                f.width(),
                f.height(),
                f.pixels(),
            )
        })
    })?;
    let cfg = synth.config();
    let boxes = (0..synth.frame_count()).map(|i| cfg.roi_box(i)).collect();
    let track = RoiTrack::new(boxes)?;
    let file = fs::File::create(out.join("roi_track.csv"))?;
    track.write(BufWriter::new(file))?;
    write_json(&out.join("truth.json"), &synth.ground_truth())?;
    write_json(&out.join("synth.json"), cfg)?;
    Ok(())
}

fn run_evaluate(pred: &Path, truth: &Path, out: &Path, tolerance_ms: f64) -> Result<()> {
    let run: Analysis = read_json(pred)?;
    let truth: GroundTruth = read_json(truth)?;
    let report = evaluate(&run, &truth, tolerance_ms)?;
    write_json(out, &report)
}

/// Scales non-negative values so the largest maps to 255.
fn normalized(values: impl Iterator<Item = f64> + Clone) -> Vec<u8> {
    let max = values.clone().fold(0.0f64, f64::max);
    let k = if max > 0.0 { 255.0 / max } else { 0.0 };
    values.map(|v| (v * k).round() as u8).collect()
}

fn write_stages(dir: &Path, s: &EdgeStages) -> Result<()> {
    let (w, h) = (s.blurred.width(), s.blurred.height());
    let blurred: Vec<u8> = s
        .blurred
        .values()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    write_pgm(&dir.join("blurred.pgm"), w, h, &blurred)?;
    let mags = s.gradients.magnitudes();
    write_pgm(
        &dir.join("magnitude.pgm"),
        w,
        h,
        &normalized(mags.iter().copied()),
    )?;
    let dirs: Vec<u8> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            if s.gradients.magnitude(x, y) == 0.0 {
                0
            } else {
                (64.0 + 48.0 * s.gradients.quantized(x, y) / std::f64::consts::FRAC_PI_4) as u8
            }
        })
        .collect();
    write_pgm(&dir.join("direction.pgm"), w, h, &dirs)?;
    write_pgm(
        &dir.join("thin.pgm"),
        w,
        h,
        &normalized(s.thin.values().iter().copied()),
    )?;
    let edges: Vec<u8> = s.edges.bits().iter().map(|&b| b * 255).collect();
    write_pgm(&dir.join("edges.pgm"), w, h, &edges)?;
    let summary = serde_json::json!({
        "width": w,
        "height": h,
        "origin": s.edges.origin(),
        "mean": s.thresholds.mean,
        "stddev": s.thresholds.stddev,
        "t_low": s.thresholds.t_low,
        "t_high": s.thresholds.t_high,
        "edge_pixels": s.edges.count(),
    });
    write_json(&dir.join("stages.json"), &summary)
}

fn run_debug_edges(g: &GlobalArgs, input: &InputArgs, frame: u64) -> Result<()> {
    let mut source = input.open(g.fps)?;
    let f: GrayFrame = source
        .by_ref()
        .find(|f| f.as_ref().map_or(true, |f| f.frame_index() == frame))
        .with_context(|| format!("frame: input has no frame {frame}"))??;
    let target = match roi_source(g)? {
        Some(roi) if !g.full_frame_edges => match roi.rect_for(frame, f.width(), f.height())? {
            Some(r) => Some(r),
            None => bail!("roi: no detection for frame {frame}"),
        },
        _ => None,
    };
    let (img, origin) = match target {
        Some(r) => (f.crop(r.x0, r.y0, r.x1, r.y1)?, (r.x0, r.y0)),
        None => (f, (0, 0)),
    };
    let mut stages = detect_edges_staged(&img, HysteresisMode::SinglePass)?;
    stages.edges = stages.edges.with_origin(origin.0, origin.1);
    fs::create_dir_all(&input.out).with_context(|| format!("creating {}", input.out.display()))?;
    write_stages(&input.out, &stages)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Analyze(input) => run_analyze(g, input),
        Command::GenSynth { config, out } => {
            run_gen_synth(g, config.as_deref(), out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            pred,
            truth,
            out,
            tolerance_ms,
        } => {
            run_evaluate(pred, truth, out, *tolerance_ms)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DebugEdges { input, frame } => {
            run_debug_edges(g, input, *frame)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // Exit status 2 is the apnea alarm, so usage errors must not use clap's
    // default of 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
