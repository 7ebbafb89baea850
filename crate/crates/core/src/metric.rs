//! Inter-onset intervals and their classification against the 1:2:3
//! eighth-note-triplet grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GrooveError, Result};
use crate::onset::{Label, OnsetSeries};

/// Intervals longer than this many base units are treated as missed onsets.
pub const DEFAULT_MAX_MULTIPLE: f64 = 3.5;
pub const DEFAULT_HISTOGRAM_BIN_S: f64 = 0.002;

const CONVERGENCE_S: f64 = 1e-4;
const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeatClass {
    Single,
    Double,
    Triple,
    Discarded,
}

impl BeatClass {
    pub const VALID: [BeatClass; 3] = [BeatClass::Single, BeatClass::Double, BeatClass::Triple];

    /// Number of triplet units the class spans; `None` for discarded.
    pub fn multiple(self) -> Option<u32> {
        match self {
            BeatClass::Single => Some(1),
            BeatClass::Double => Some(2),
            BeatClass::Triple => Some(3),
            BeatClass::Discarded => None,
        }
    }

    /// Band rule on `ratio = tau / base`: below 1.5 single, below 2.5
    /// double, up to `max_multiple` triple, discarded beyond.
    pub fn from_ratio(ratio: f64, max_multiple: f64) -> BeatClass {
        if !(ratio <= max_multiple) {
            BeatClass::Discarded
        } else if ratio < 1.5 {
            BeatClass::Single
        } else if ratio < 2.5 {
            BeatClass::Double
        } else {
            BeatClass::Triple
        }
    }
}

impl fmt::Display for BeatClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeatClass::Single => "single",
            BeatClass::Double => "double",
            BeatClass::Triple => "triple",
            BeatClass::Discarded => "discarded",
        })
    }
}

/// τ(i) = f(i+1) − f(i) plus its classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub tau_s: f64,
    /// Index of the onset the interval starts at.
    pub start_index: usize,
    pub start_time_s: f64,
    /// `None` until [`classify_intervals`] has run.
    pub klass: Option<BeatClass>,
    /// τ divided by the class multiple; `None` unless valid.
    pub normalized_tau_s: Option<f64>,
    pub valid: bool,
    pub start_label: Label,
    pub end_label: Label,
}

impl Interval {
    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.tau_s
    }

    /// A ghost-note split of a triplet (hi-hat, ghost snare, hi-hat).
    pub fn touches_ghost(&self) -> bool {
        self.start_label == Label::Ghost || self.end_label == Label::Ghost
    }

    pub fn multiple(&self) -> Option<u32> {
        self.klass.and_then(BeatClass::multiple)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntervalSeries {
    pub intervals: Vec<Interval>,
}

impl IntervalSeries {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.intervals.iter().map(|i| i.tau_s).collect()
    }

    /// Normalized durations of all valid intervals, in order.
    pub fn valid_normalized(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .filter_map(|i| i.normalized_tau_s)
            .collect()
    }

    /// Raw durations of the valid intervals of one class, in order.
    pub fn class_taus(&self, klass: BeatClass) -> Vec<f64> {
        self.intervals
            .iter()
            .filter(|i| i.klass == Some(klass))
            .map(|i| i.tau_s)
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.intervals.iter().filter(|i| i.valid).count()
    }

    /// Fraction of raw intervals that survived classification.
    pub fn detection_rate(&self) -> f64 {
        if self.intervals.is_empty() {
            return 0.0;
        }
        self.valid_count() as f64 / self.intervals.len() as f64
    }
}

/// Consecutive differences of onset times. Needs at least two onsets.
pub fn intervals(onsets: &OnsetSeries) -> Result<IntervalSeries> {
    if onsets.len() < 2 {
        return Err(GrooveError::EmptyInput(format!(
            "need at least 2 onsets for intervals, got {}",
            onsets.len()
        )));
    }
    let intervals = onsets
        .onsets
        .windows(2)
        .enumerate()
        .map(|(i, w)| Interval {
            tau_s: w[1].time_s - w[0].time_s,
            start_index: i,
            start_time_s: w[0].time_s,
            klass: None,
            normalized_tau_s: None,
            valid: false,
            start_label: w[0].label,
            end_label: w[1].label,
        })
        .collect();
    Ok(IntervalSeries { intervals })
}

/// Fixed-point estimate of the eighth-note-triplet unit ⟨τ⟩.
///
/// Starts from `60 / (6 * bpm)` when a tempo hint is given (six triplet
/// units per half-time beat), otherwise from the median of the cluster
/// around the 10th percentile of τ. Each step rounds every τ/⟨τ⟩ to its
/// class multiple and re-estimates ⟨τ⟩ as the mean of τ/multiple over the
/// non-discarded intervals, until the estimate moves by less than 0.1 ms.
pub fn estimate_base_unit(
    series: &IntervalSeries,
    hint_bpm: Option<f64>,
    max_multiple: f64,
) -> Result<f64> {
    if series.is_empty() {
        return Err(GrooveError::EmptyInput("no intervals".into()));
    }
    let taus = series.taus();
    let mut base = match hint_bpm {
        Some(bpm) if bpm > 0.0 && bpm.is_finite() => 60.0 / (6.0 * bpm),
        Some(bpm) => {
            return Err(GrooveError::Parameter(format!("bpm hint must be positive, got {bpm}")))
        }
        None => lower_mode(&taus),
    };

    for _ in 0..MAX_ITERATIONS {
        let (sum, count) = taus
            .iter()
            .filter_map(|&t| {
                BeatClass::from_ratio(t / base, max_multiple)
                    .multiple()
                    .map(|m| t / m as f64)
            })
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            return Err(GrooveError::EmptyInput(format!(
                "every interval exceeds {max_multiple} base units"
            )));
        }
        let next = sum / count as f64;
        let converged = (next - base).abs() < CONVERGENCE_S;
        base = next;
        if converged {
            return Ok(base);
        }
    }
    Err(GrooveError::Estimation {
        iterations: MAX_ITERATIONS,
    })
}

fn lower_mode(taus: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = taus.iter().copied().filter(|t| *t > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let p10 = sorted[(sorted.len() - 1) / 10];
    let cluster: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&t| t >= 0.75 * p10 && t <= 1.25 * p10)
        .collect();
    cluster[cluster.len() / 2]
}

/// Assign every interval to a class using the half-integer bands of
/// [`BeatClass::from_ratio`].
pub fn classify_intervals(series: &IntervalSeries, base_s: f64, max_multiple: f64) -> Result<IntervalSeries> {
    if !(base_s > 0.0) {
        return Err(GrooveError::Parameter(format!("base unit must be positive, got {base_s}")));
    }
    let intervals = series
        .intervals
        .iter()
        .map(|iv| {
            let klass = BeatClass::from_ratio(iv.tau_s / base_s, max_multiple);
            let multiple = klass.multiple();
            Interval {
                klass: Some(klass),
                normalized_tau_s: multiple.map(|m| iv.tau_s / m as f64),
                valid: multiple.is_some(),
                ..*iv
            }
        })
        .collect();
    Ok(IntervalSeries { intervals })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width_s: f64,
    /// Left edge of the first bin.
    pub start_s: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bin_width_s: f64) -> Self {
        if values.is_empty() {
            return Self {
                bin_width_s,
                start_s: 0.0,
                counts: Vec::new(),
            };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start_s = (min / bin_width_s).floor() * bin_width_s;
        let bins = ((max - start_s) / bin_width_s).floor() as usize + 1;
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - start_s) / bin_width_s).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self {
            bin_width_s,
            start_s,
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub count: usize,
    pub mean_s: Option<f64>,
    /// Sample standard deviation (n − 1); needs two values.
    pub std_s: Option<f64>,
    pub histogram: Histogram,
}

impl ClassStats {
    pub fn from_values(values: &[f64], bin_width_s: f64) -> Self {
        let n = values.len();
        let mean_s = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let std_s = mean_s.filter(|_| n > 1).map(|m| {
            (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self {
            count: n,
            mean_s,
            std_s,
            histogram: Histogram::build(values, bin_width_s),
        }
    }
}

/// Per-class statistics, serialized as an object keyed by class name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalStats {
    pub single: ClassStats,
    pub double: ClassStats,
    pub triple: ClassStats,
    pub raw_count: usize,
    pub valid_count: usize,
    pub detection_rate: f64,
}

impl IntervalStats {
    pub fn get(&self, klass: BeatClass) -> Option<&ClassStats> {
        match klass {
            BeatClass::Single => Some(&self.single),
            BeatClass::Double => Some(&self.double),
            BeatClass::Triple => Some(&self.triple),
            BeatClass::Discarded => None,
        }
    }
}

pub fn interval_stats(series: &IntervalSeries, bin_width_s: f64) -> IntervalStats {
    let stats = |k| ClassStats::from_values(&series.class_taus(k), bin_width_s);
    IntervalStats {
        single: stats(BeatClass::Single),
        double: stats(BeatClass::Double),
        triple: stats(BeatClass::Triple),
        raw_count: series.len(),
        valid_count: series.valid_count(),
        detection_rate: series.detection_rate(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectionTag {
    #[serde(rename = "A1-verse")]
    Verse,
    #[serde(rename = "A2-prechorus")]
    PreChorus,
    #[serde(rename = "B-chorus")]
    Chorus,
    #[serde(rename = "other")]
    Other,
}

impl fmt::Display for SectionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SectionTag::Verse => "A1-verse",
            SectionTag::PreChorus => "A2-prechorus",
            SectionTag::Chorus => "B-chorus",
            SectionTag::Other => "other",
        })
    }
}

impl FromStr for SectionTag {
    type Err = GrooveError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A1-verse" => Ok(SectionTag::Verse),
            "A2-prechorus" => Ok(SectionTag::PreChorus),
            "B-chorus" => Ok(SectionTag::Chorus),
            "other" => Ok(SectionTag::Other),
            other => Err(GrooveError::Csv(format!("unknown section tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub start_time_s: f64,
    pub end_time_s: f64,
    pub tag: SectionTag,
}

/// User-supplied song structure; sections are ordered and disjoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionMap {
    pub sections: Vec<Section>,
}

impl SectionMap {
    pub fn new(sections: Vec<Section>) -> Result<Self> {
        for (i, s) in sections.iter().enumerate() {
            if !(s.end_time_s > s.start_time_s) {
                return Err(GrooveError::Parameter(format!("section {i} has non-positive length")));
            }
        }
        if let Some(i) = sections
            .windows(2)
            .position(|w| w[1].start_time_s < w[0].end_time_s)
        {
            return Err(GrooveError::Parameter(format!(
                "section {} overlaps or precedes section {i}",
                i + 1
            )));
        }
        Ok(Self { sections })
    }
}
