//! Tempo drift against an imaginary metronome and the swing ratio.

use serde::Serialize;

use crate::error::{GrooveError, Result};
use crate::metric::{BeatClass, IntervalSeries};

/// How an interval spanning `m` grid units enters the drift sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMode {
    /// Each valid interval is divided by its multiple and counts as one
    /// grid step: d(i) − d(i−1) = τ(i)/m(i) − ⟨τ⟩.
    #[default]
    Normalized,
    /// Each valid interval advances the clock by τ and the grid by m steps:
    /// d(i) − d(i−1) = τ(i) − m(i)·⟨τ⟩. This is the literal offset from a
    /// metronome ticking every ⟨τ⟩.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftPoint {
    /// Number of intervals elapsed.
    pub index: usize,
    /// Time of the onset that closes the interval.
    pub time_s: f64,
    pub d_s: f64,
    pub gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSeries {
    pub mode: DriftMode,
    pub points: Vec<DriftPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftSummary {
    pub max_abs_s: f64,
    pub final_s: f64,
    pub gap_count: usize,
}

impl DriftSeries {
    pub fn summary(&self) -> DriftSummary {
        DriftSummary {
            max_abs_s: self.points.iter().map(|p| p.d_s.abs()).fold(0.0, f64::max),
            final_s: self.points.last().map_or(0.0, |p| p.d_s),
            gap_count: self.points.iter().filter(|p| p.gap).count(),
        }
    }

    /// Maximal runs of non-gap points, as index ranges into `points`.
    pub fn spans(&self) -> Vec<std::ops::Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, p) in self.points.iter().enumerate() {
            match (p.gap, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..self.points.len());
        }
        spans
    }
}

/// Cumulative drift d(i) of the performance from a metronome with period
/// `base_s`. A discarded interval emits a gap point with d = 0 and restarts
/// the accumulation.
pub fn compute_drift(series: &IntervalSeries, base_s: f64, mode: DriftMode) -> Result<DriftSeries> {
    if !(base_s > 0.0) {
        return Err(GrooveError::Parameter(format!("base unit must be positive, got {base_s}")));
    }
    let mut points = Vec::with_capacity(series.len());
    let mut d = 0.0;
    for (i, iv) in series.intervals.iter().enumerate() {
        let klass = iv.klass.ok_or_else(|| {
            GrooveError::Parameter(format!("interval {i} is not classified"))
        })?;
        let gap = match klass.multiple() {
            Some(m) => {
                d += match mode {
                    DriftMode::Normalized => iv.tau_s / m as f64 - base_s,
                    DriftMode::Grid => iv.tau_s - m as f64 * base_s,
                };
                false
            }
            None => {
                d = 0.0;
                true
            }
        };
        points.push(DriftPoint {
            index: i + 1,
            time_s: iv.end_time_s(),
            d_s: d,
            gap,
        });
    }
    Ok(DriftSeries { mode, points })
}

/// Swing ratio y/x with y the mean double and x the mean single between
/// triplets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwingReport {
    pub swing_ratio: f64,
    pub mean_inter_triplet_single_s: f64,
    pub mean_double_s: f64,
    pub mean_triple_s: Option<f64>,
    /// 1 : double/single : triple/single
    pub ratio_triad: RatioTriad,
    pub n_singles_used: usize,
    pub n_doubles_used: usize,
    /// Singles left out because they split a triplet at a ghost note.
    pub n_intra_triplet_singles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioTriad {
    pub single: f64,
    pub double: f64,
    pub triple: Option<f64>,
}

/// Mean double divided by mean inter-triplet single. Singles touching a
/// ghost-labelled onset are intra-triplet and excluded.
pub fn swing_ratio(series: &IntervalSeries) -> Result<SwingReport> {
    let mut singles = Vec::new();
    let mut doubles = Vec::new();
    let mut triples = Vec::new();
    let mut intra = 0;
    for iv in &series.intervals {
        match iv.klass {
            Some(BeatClass::Single) if iv.touches_ghost() => intra += 1,
            Some(BeatClass::Single) => singles.push(iv.tau_s),
            Some(BeatClass::Double) => doubles.push(iv.tau_s),
            Some(BeatClass::Triple) => triples.push(iv.tau_s),
            _ => {}
        }
    }
    if singles.is_empty() {
        return Err(GrooveError::UndefinedRatio("no inter-triplet singles".into()));
    }
    if doubles.is_empty() {
        return Err(GrooveError::UndefinedRatio("no doubles".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let single = mean(&singles);
    let double = mean(&doubles);
    let triple = (!triples.is_empty()).then(|| mean(&triples));
    Ok(SwingReport {
        swing_ratio: double / single,
        mean_inter_triplet_single_s: single,
        mean_double_s: double,
        mean_triple_s: triple,
        ratio_triad: RatioTriad {
            single: 1.0,
            double: double / single,
            triple: triple.map(|t| t / single),
        },
        n_singles_used: singles.len(),
        n_doubles_used: doubles.len(),
        n_intra_triplet_singles: intra,
    })
}
