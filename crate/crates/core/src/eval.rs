//! Scoring against ground truth: ROI box accuracy, breathing-cycle accuracy
//! and apnea-event confusion metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::breath::{window_bounds, ApneaEvent};
use crate::pipeline::Analysis;
use crate::roi::RoiRect;
use crate::synth::{Cycle, GroundTruth};

/// Minimum `area(gt) / area(pred)` for a box to count as accurate.
pub const BOX_AREA_RATIO: f64 = 0.6;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction covers {pred} frames but ground truth has {truth}")]
    FrameCountMismatch { pred: usize, truth: usize },
}

fn box_ok(pred: &RoiRect, gt: &RoiRect) -> bool {
    let area = pred.area();
    area > 0.0 && pred.contains_rect(gt) && gt.area() / area > BOX_AREA_RATIO
}

/// Fraction of frames whose predicted box contains the true box and is not
/// too loose. Frames without a prediction score 0; `None` for no frames.
pub fn box_accuracy(pred: &[Option<RoiRect>], gt: &[RoiRect]) -> Result<Option<f64>, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::FrameCountMismatch {
            pred: pred.len(),
            truth: gt.len(),
        });
    }
    if gt.is_empty() {
        return Ok(None);
    }
    let hits = pred
        .iter()
        .zip(gt)
        .filter(|(p, g)| p.as_ref().is_some_and(|p| box_ok(p, g)))
        .count();
    Ok(Some(hits as f64 / gt.len() as f64))
}

/// Fraction of cycles `[start, end)` holding exactly one peak; `None` when
/// there are no cycles.
pub fn cycle_accuracy(peak_times_ms: &[f64], cycles: &[Cycle]) -> Option<f64> {
    if cycles.is_empty() {
        return None;
    }
    let hits = cycles
        .iter()
        .filter(|c| {
            let lo = peak_times_ms.partition_point(|&t| t < c.start_ms);
            let hi = peak_times_ms.partition_point(|&t| t < c.end_ms);
            hi - lo == 1
        })
        .count();
    Some(hits as f64 / cycles.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// DAR and FAR exactly as defined for the detector, `TP/(TP+TN)` and
/// `FP/(FP+FN)`, next to conventional sensitivity and precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub dar: Option<f64>,
    pub far: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(c: &ConfusionCounts) -> ConfusionMetrics {
    ConfusionMetrics {
        dar: ratio(c.tp, c.tp + c.tn),
        far: ratio(c.fp, c.fp + c.fn_),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        precision: ratio(c.tp, c.tp + c.fp),
    }
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

fn span(e: &ApneaEvent) -> (f64, f64) {
    (e.start_ms, e.end_ms())
}

/// Matches predicted against true apnea events one-to-one. A prediction,
/// widened by `tolerance_ms` on each side, matches a true event when their
/// overlap is at least half the shorter of the two. `TN` counts the
/// `windows` touched by neither a prediction nor a true event.
pub fn match_events(
    pred: &[ApneaEvent],
    gt: &[ApneaEvent],
    windows: &[(f64, f64)],
    tolerance_ms: f64,
) -> ConfusionCounts {
    let mut used = vec![false; gt.len()];
    let mut tp = 0;
    for p in pred {
        let ps = (p.start_ms - tolerance_ms, p.end_ms() + tolerance_ms);
        let hit = gt.iter().enumerate().find(|(j, g)| {
            let gs = span(g);
            let shorter = (ps.1 - ps.0).min(gs.1 - gs.0);
            !used[*j] && overlap(ps, gs) >= 0.5 * shorter
        });
        if let Some((j, _)) = hit {
            used[j] = true;
            tp += 1;
        }
    }
    let touches = |w: (f64, f64), e: &ApneaEvent| e.start_ms < w.1 && e.end_ms() > w.0;
    let tn = windows
        .iter()
        .filter(|&&w| !pred.iter().chain(gt).any(|e| touches(w, e)))
        .count() as u64;
    ConfusionCounts {
        tp,
        fp: pred.len() as u64 - tp,
        tn,
        fn_: gt.len() as u64 - tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Supplementary {
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub counts: ConfusionCounts,
    pub cycles_evaluated: usize,
    pub frames_evaluated: usize,
}

/// Contents of `metrics.json`. `None` marks a metric whose denominator is
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub box_accuracy: Option<f64>,
    pub cycle_accuracy: Option<f64>,
    pub dar: Option<f64>,
    pub far: Option<f64>,
    pub supplementary: Supplementary,
}

/// Scores one analysis run against the ground truth of its input.
pub fn evaluate(
    run: &Analysis,
    truth: &GroundTruth,
    tolerance_ms: f64,
) -> Result<MetricsReport, EvalError> {
    let pred_rois = run.roi_per_frame();
    let gt_rois = vec![truth.roi; truth.frame_count as usize];
    let box_acc = box_accuracy(&pred_rois, &gt_rois)?;
    let cycle_acc = cycle_accuracy(&run.breaths.peak_times_ms, &truth.cycles);
    let windows = window_bounds(0.0, truth.duration_ms, run.apnea.window_ms);
    // Only pauses longer than the run's threshold are apnea.
    let truth_events: Vec<ApneaEvent> = truth
        .pauses
        .iter()
        .copied()
        .filter(|p| p.length_ms > run.apnea.pause_ms)
        .collect();
    let counts = match_events(&run.apnea_events, &truth_events, &windows, tolerance_ms);
    let m = confusion_metrics(&counts);
    Ok(MetricsReport {
        box_accuracy: box_acc,
        cycle_accuracy: cycle_acc,
        dar: m.dar,
        far: m.far,
        supplementary: Supplementary {
            sensitivity: m.sensitivity,
            precision: m.precision,
            counts,
            cycles_evaluated: truth.cycles.len(),
            frames_evaluated: gt_rois.len(),
        },
    })
}
