//! Breath peaks, breathing intervals and windowed apnea severity.

use serde::{Deserialize, Serialize};

/// Breathing pauses longer than this are apnea.
pub const DEFAULT_PAUSE_MS: f64 = 15_000.0;
/// Length of each scoring window.
pub const DEFAULT_WINDOW_MS: f64 = 200_000.0;

/// Which local-extremum test marks a peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakRule {
    /// `s[t] > s[t-1] && s[t] >= s[t+1]`: local maximum, plateaus credited
    /// to their first sample.
    #[default]
    LocalMax,
    /// `s[t] > s[t-1] && s[t] <= s[t+1]`, the inequality pair as it was
    /// originally printed. Marks rising samples rather than maxima.
    AsPrinted,
}

impl PeakRule {
    #[inline]
    pub fn is_peak(self, prev: f64, cur: f64, next: f64) -> bool {
        match self {
            PeakRule::LocalMax => cur > prev && cur >= next,
            PeakRule::AsPrinted => cur > prev && cur <= next,
        }
    }
}

/// Indices of peaks in `series`. The first and last samples are never peaks.
pub fn find_peaks(series: &[f64], rule: PeakRule) -> Vec<usize> {
    series
        .windows(3)
        .enumerate()
        .filter(|(_, w)| rule.is_peak(w[0], w[1], w[2]))
        .map(|(i, _)| i + 1)
        .collect()
}

/// Online form of [`find_peaks`]: reports a sample as a peak once its
/// successor arrives.
#[derive(Debug, Clone)]
pub struct StreamingPeaks<K> {
    rule: PeakRule,
    prev: Option<f64>,
    cur: Option<(K, f64)>,
}

impl<K: Copy> StreamingPeaks<K> {
    pub fn new(rule: PeakRule) -> Self {
        Self {
            rule,
            prev: None,
            cur: None,
        }
    }

    /// Pushes the next sample; returns the key of the previous sample if it
    /// turned out to be a peak.
    pub fn push(&mut self, key: K, value: f64) -> Option<K> {
        let found = match (self.prev, self.cur) {
            (Some(p), Some((k, c))) if self.rule.is_peak(p, c, value) => Some(k),
            _ => None,
        };
        self.prev = self.cur.map(|(_, c)| c);
        self.cur = Some((key, value));
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathInterval {
    pub breath: usize,
    pub interval_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BreathReport {
    pub peak_times_ms: Vec<f64>,
    pub intervals: Vec<BreathInterval>,
}

impl BreathReport {
    /// `breath,interval_ms` rows, one per interval.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("breath,interval_ms\n");
        for iv in &self.intervals {
            out.push_str(&format!("{},{:.1}\n", iv.breath, iv.interval_ms));
        }
        out
    }
}

/// Converts peak frame indices into numbered breath intervals.
pub fn breath_intervals(peak_frames: &[u64], frame_period_ms: f64) -> BreathReport {
    let peak_times_ms = peak_frames
        .iter()
        .map(|&f| f as f64 * frame_period_ms)
        .collect();
    let intervals = peak_frames
        .windows(2)
        .enumerate()
        .map(|(i, w)| BreathInterval {
            breath: i + 1,
            interval_ms: (w[1] - w[0]) as f64 * frame_period_ms,
        })
        .collect();
    BreathReport {
        peak_times_ms,
        intervals,
    }
}

/// A breathing pause: the gap between two consecutive peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApneaEvent {
    pub start_ms: f64,
    pub length_ms: f64,
}

impl ApneaEvent {
    pub fn end_ms(&self) -> f64 {
        self.start_ms + self.length_ms
    }
}

/// Inter-peak gaps strictly longer than `pause_ms`.
pub fn apnea_events(peak_times_ms: &[f64], pause_ms: f64) -> Vec<ApneaEvent> {
    peak_times_ms
        .windows(2)
        .filter(|w| w[1] - w[0] > pause_ms)
        .map(|w| ApneaEvent {
            start_ms: w[0],
            length_ms: w[1] - w[0],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub window_start_ms: f64,
    pub window_end_ms: f64,
    pub severity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApneaReport {
    pub window_ms: f64,
    pub pause_ms: f64,
    pub windows: Vec<WindowScore>,
}

impl ApneaReport {
    pub fn max_severity(&self) -> u32 {
        self.windows.iter().map(|w| w.severity).max().unwrap_or(0)
    }
}

/// Window boundaries tiling `[start_ms, end_ms)`; the last window is cut
/// short at `end_ms`.
pub fn window_bounds(start_ms: f64, end_ms: f64, window_ms: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let ws = start_ms + k as f64 * window_ms;
        if ws >= end_ms {
            break;
        }
        out.push((ws, (ws + window_ms).min(end_ms)));
        k += 1;
    }
    out
}

/// Scores tumbling windows over `[start_ms, end_ms)`. A window's severity is
/// the number of inter-peak gaps longer than `pause_ms` that overlap it; a gap
/// spanning a boundary counts in both windows.
pub fn score_windows(
    peak_times_ms: &[f64],
    start_ms: f64,
    end_ms: f64,
    window_ms: f64,
    pause_ms: f64,
) -> ApneaReport {
    let events = apnea_events(peak_times_ms, pause_ms);
    let windows = window_bounds(start_ms, end_ms, window_ms)
        .into_iter()
        .map(|(ws, we)| WindowScore {
            window_start_ms: ws,
            window_end_ms: we,
            severity: events
                .iter()
                .filter(|e| e.start_ms < we && e.end_ms() > ws)
                .count() as u32,
        })
        .collect();
    ApneaReport {
        window_ms,
        pause_ms,
        windows,
    }
}

/// Incremental window scorer. Windows are reported once no future gap can
/// overlap them, i.e. when a peak at or past the window end has been seen,
/// or at [`ApneaMonitor::finish`].
#[derive(Debug, Clone)]
pub struct ApneaMonitor {
    start_ms: f64,
    window_ms: f64,
    pause_ms: f64,
    next_window: u64,
    last_peak: Option<f64>,
    events: Vec<ApneaEvent>,
}

impl ApneaMonitor {
    pub fn new(start_ms: f64, window_ms: f64, pause_ms: f64) -> Self {
        Self {
            start_ms,
            window_ms,
            pause_ms,
            next_window: 0,
            last_peak: None,
            events: Vec::new(),
        }
    }

    pub fn events(&self) -> &[ApneaEvent] {
        &self.events
    }

    fn bounds(&self, k: u64) -> (f64, f64) {
        let ws = self.start_ms + k as f64 * self.window_ms;
        (ws, ws + self.window_ms)
    }

    fn score(&self, ws: f64, we: f64) -> WindowScore {
        let severity = self
            .events
            .iter()
            .rev()
            .take_while(|e| e.end_ms() > ws)
            .filter(|e| e.start_ms < we)
            .count() as u32;
        WindowScore {
            window_start_ms: ws,
            window_end_ms: we,
            severity,
        }
    }

    /// Records a peak and returns the windows that closed because of it.
    pub fn push_peak(&mut self, t_ms: f64) -> Vec<WindowScore> {
        if let Some(prev) = self.last_peak {
            if t_ms - prev > self.pause_ms {
                self.events.push(ApneaEvent {
                    start_ms: prev,
                    length_ms: t_ms - prev,
                });
            }
        }
        self.last_peak = Some(t_ms);
        let mut closed = Vec::new();
        loop {
            let (ws, we) = self.bounds(self.next_window);
            if t_ms < we {
                break;
            }
            closed.push(self.score(ws, we));
            self.next_window += 1;
        }
        closed
    }

    /// Closes every remaining window up to `end_ms`, the last one partial.
    pub fn finish(&mut self, end_ms: f64) -> Vec<WindowScore> {
        let mut closed = Vec::new();
        loop {
            let (ws, we) = self.bounds(self.next_window);
            if ws >= end_ms {
                break;
            }
            closed.push(self.score(ws, we.min(end_ms)));
            self.next_window += 1;
        }
        closed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaks_examples() {
        assert_eq!(
            find_peaks(&[0.0, 1.0, 0.0, 2.0, 0.0], PeakRule::LocalMax),
            vec![1, 3]
        );
        assert!(find_peaks(&[1.0, 2.0, 3.0, 4.0], PeakRule::LocalMax).is_empty());
        assert_eq!(
            find_peaks(&[1.0, 2.0, 2.0, 1.0], PeakRule::LocalMax),
            vec![1]
        );
        assert!(find_peaks(&[1.0, 2.0], PeakRule::LocalMax).is_empty());
    }

    #[test]
    fn printed_rule_marks_rising_samples() {
        assert_eq!(
            find_peaks(&[0.0, 1.0, 2.0, 3.0, 0.0], PeakRule::AsPrinted),
            vec![1, 2]
        );
        assert!(find_peaks(&[0.0, 1.0, 0.0], PeakRule::AsPrinted).is_empty());
    }

    #[test]
    fn streaming_matches_batch() {
        let s = [0.0, 1.0, 1.0, 0.5, 2.0, 2.0, 2.0, 1.0, 3.0, 4.0];
        for rule in [PeakRule::LocalMax, PeakRule::AsPrinted] {
            let mut sp = StreamingPeaks::new(rule);
            let online: Vec<usize> = s
                .iter()
                .enumerate()
                .filter_map(|(i, &v)| sp.push(i, v))
                .collect();
            assert_eq!(online, find_peaks(&s, rule));
        }
    }

    #[test]
    fn intervals_from_frames() {
        let r = breath_intervals(&[0, 55], 40.0);
        assert_eq!(
            r.intervals,
            vec![BreathInterval {
                breath: 1,
                interval_ms: 2200.0
            }]
        );
        let r = breath_intervals(&[0, 55, 101], 40.0);
        let ms: Vec<f64> = r.intervals.iter().map(|i| i.interval_ms).collect();
        assert_eq!(ms, vec![2200.0, 1840.0]);
        assert!(breath_intervals(&[17], 40.0).intervals.is_empty());
    }

    #[test]
    fn intervals_csv_format() {
        let r = breath_intervals(&[0, 55, 101], 40.0);
        assert_eq!(r.to_csv(), "breath,interval_ms\n1,2200.0\n2,1840.0\n");
    }

    fn peaks_from_gaps(gaps_ms: &[f64]) -> Vec<f64> {
        let mut t = 1000.0;
        let mut out = vec![t];
        for g in gaps_ms {
            t += g;
            out.push(t);
        }
        out
    }

    #[test]
    fn one_long_gap() {
        let mut gaps = vec![2000.0; 90];
        gaps.push(16_000.0);
        let r = score_windows(
            &peaks_from_gaps(&gaps),
            0.0,
            200_000.0,
            DEFAULT_WINDOW_MS,
            DEFAULT_PAUSE_MS,
        );
        assert_eq!(r.windows.len(), 1);
        assert_eq!(r.windows[0].severity, 1);
    }

    #[test]
    fn ten_second_gap_is_not_apnea() {
        let r = score_windows(
            &peaks_from_gaps(&[2000.0, 10_000.0, 2000.0]),
            0.0,
            200_000.0,
            DEFAULT_WINDOW_MS,
            DEFAULT_PAUSE_MS,
        );
        assert_eq!(r.windows[0].severity, 0);
    }

    #[test]
    fn two_long_gaps() {
        let r = score_windows(
            &peaks_from_gaps(&[2000.0, 15_500.0, 3000.0, 20_000.0, 2000.0]),
            0.0,
            200_000.0,
            DEFAULT_WINDOW_MS,
            DEFAULT_PAUSE_MS,
        );
        assert_eq!(r.windows[0].severity, 2);
    }

    #[test]
    fn exactly_fifteen_seconds_is_not_apnea() {
        let r = score_windows(
            &[0.0, 15_000.0],
            0.0,
            200_000.0,
            DEFAULT_WINDOW_MS,
            DEFAULT_PAUSE_MS,
        );
        assert_eq!(r.windows[0].severity, 0);
    }

    #[test]
    fn straddling_gap_counts_twice() {
        let r = score_windows(
            &[190_000.0, 210_000.0],
            0.0,
            400_000.0,
            DEFAULT_WINDOW_MS,
            DEFAULT_PAUSE_MS,
        );
        let sev: Vec<u32> = r.windows.iter().map(|w| w.severity).collect();
        assert_eq!(sev, vec![1, 1]);
    }

    #[test]
    fn trailing_partial_window() {
        let b = window_bounds(0.0, 450_000.0, 200_000.0);
        assert_eq!(
            b,
            vec![
                (0.0, 200_000.0),
                (200_000.0, 400_000.0),
                (400_000.0, 450_000.0)
            ]
        );
        assert_eq!(window_bounds(0.0, 200_000.0, 200_000.0).len(), 1);
    }

    #[test]
    fn monitor_closes_windows_in_order() {
        let peaks = [
            1000.0, 3000.0, 30_000.0, 199_000.0, 230_000.0, 250_000.0, 420_000.0,
        ];
        let mut m = ApneaMonitor::new(0.0, 200_000.0, 15_000.0);
        let mut got = Vec::new();
        for &p in &peaks {
            got.extend(m.push_peak(p));
        }
        got.extend(m.finish(500_000.0));
        let batch = score_windows(&peaks, 0.0, 500_000.0, 200_000.0, 15_000.0);
        assert_eq!(got, batch.windows);
    }
}
