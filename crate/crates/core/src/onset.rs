//! Onset picking on the amplitude envelope, merging of multi-hit artifacts
//! and the manual correction workflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GrooveError, Result};
use crate::signal::EnvelopeSignal;

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_REFRACTORY_MS: f64 = 50.0;
pub const DEFAULT_MERGE_MS: f64 = 3.0;
/// Onsets whose timing uncertainty exceeds this are dropped.
pub const MAX_UNCERTAINTY_MS: f64 = 5.0;
/// Edits resolve their target to the nearest onset within this distance.
pub const EDIT_RESOLVE_MS: f64 = 5.0;

// slack for decimal round-off in the millisecond comparisons
const TIME_EPS_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Hihat,
    Snare,
    Ghost,
    Unknown,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Hihat => "hihat",
            Label::Snare => "snare",
            Label::Ghost => "ghost",
            Label::Unknown => "unknown",
        })
    }
}

impl FromStr for Label {
    type Err = GrooveError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hihat" => Ok(Label::Hihat),
            "snare" => Ok(Label::Snare),
            "ghost" => Ok(Label::Ghost),
            "unknown" | "" => Ok(Label::Unknown),
            other => Err(GrooveError::Csv(format!("unknown label '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Auto,
    ManualAdd,
    ManualMove,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Auto => "auto",
            Source::ManualAdd => "manual-add",
            Source::ManualMove => "manual-move",
        })
    }
}

impl FromStr for Source {
    type Err = GrooveError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" | "" => Ok(Source::Auto),
            "manual-add" => Ok(Source::ManualAdd),
            "manual-move" => Ok(Source::ManualMove),
            other => Err(GrooveError::Csv(format!("unknown source '{other}'"))),
        }
    }
}

/// A single stroke: timestamp f(i) and amplitude g(i).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Onset {
    pub time_s: f64,
    pub amplitude: f64,
    pub label: Label,
    pub source: Source,
    pub uncertainty_ms: f64,
}

impl Onset {
    pub fn new(time_s: f64, amplitude: f64) -> Self {
        Self {
            time_s,
            amplitude,
            label: Label::Unknown,
            source: Source::Auto,
            uncertainty_ms: 0.0,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }
}

/// Time-ordered onsets. Times are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OnsetSeries {
    pub onsets: Vec<Onset>,
}

impl OnsetSeries {
    /// Validates ordering, amplitude range and uncertainty.
    pub fn new(onsets: Vec<Onset>) -> Result<Self> {
        for (i, o) in onsets.iter().enumerate() {
            if !o.time_s.is_finite() {
                return Err(GrooveError::Parameter(format!("onset {i} has non-finite time")));
            }
            if !(0.0..=1.0).contains(&o.amplitude) {
                return Err(GrooveError::Parameter(format!(
                    "onset {i} amplitude {} outside [0, 1]",
                    o.amplitude
                )));
            }
            if !(o.uncertainty_ms >= 0.0 && o.uncertainty_ms <= MAX_UNCERTAINTY_MS) {
                return Err(GrooveError::Parameter(format!(
                    "onset {i} uncertainty {} ms outside [0, {MAX_UNCERTAINTY_MS}]",
                    o.uncertainty_ms
                )));
            }
        }
        if let Some(i) = onsets.windows(2).position(|w| w[1].time_s <= w[0].time_s) {
            return Err(GrooveError::Parameter(format!(
                "onset times not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { onsets })
    }

    /// Unlabelled automatic onsets at the given times with unit amplitude.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        Self::new(times.iter().map(|&t| Onset::new(t, 1.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.onsets.iter().map(|o| o.time_s).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.onsets.iter().map(|o| o.amplitude).collect()
    }

    /// Index of the onset nearest to `time_s` if it lies within `tol_s`.
    pub fn nearest_within(&self, time_s: f64, tol_s: f64) -> Option<usize> {
        let idx = self.onsets.partition_point(|o| o.time_s < time_s);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.onsets.len())
            .map(|i| (i, (self.onsets[i].time_s - time_s).abs()))
            .filter(|&(_, d)| d <= tol_s + TIME_EPS_S)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Fraction of the envelope peak a maximum must reach.
    pub threshold: f64,
    pub refractory_ms: f64,
    pub max_uncertainty_ms: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            refractory_ms: DEFAULT_REFRACTORY_MS,
            max_uncertainty_ms: MAX_UNCERTAINTY_MS,
        }
    }
}

/// Pick local maxima of the envelope above `threshold`, keeping the
/// strongest of any maxima closer than the refractory period.
///
/// Each onset's uncertainty is half the width of its peak above 90% of the
/// peak height; onsets wider than `max_uncertainty_ms` are dropped.
pub fn detect_onsets(env: &EnvelopeSignal, params: &DetectParams) -> Result<OnsetSeries> {
    if !(params.threshold > 0.0 && params.threshold < 1.0) {
        return Err(GrooveError::Parameter(format!(
            "threshold must lie in (0, 1), got {}",
            params.threshold
        )));
    }
    if !(params.refractory_ms > 0.0) {
        return Err(GrooveError::Parameter(format!(
            "refractory period must be positive, got {} ms",
            params.refractory_ms
        )));
    }
    if env.silent {
        return Ok(OnsetSeries::default());
    }

    let v = &env.values;
    let mut candidates = local_maxima(v, params.threshold);

    // strongest first; earlier sample wins a tie
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        v[candidates[b]]
            .total_cmp(&v[candidates[a]])
            .then(candidates[a].cmp(&candidates[b]))
    });
    let min_dist = params.refractory_ms / 1000.0 * env.sample_rate;
    let mut keep = vec![true; candidates.len()];
    for &c in &order {
        if !keep[c] {
            continue;
        }
        let pos = candidates[c] as f64;
        for j in (0..c).rev() {
            if pos - (candidates[j] as f64) >= min_dist {
                break;
            }
            keep[j] = false;
        }
        for j in c + 1..candidates.len() {
            if (candidates[j] as f64) - pos >= min_dist {
                break;
            }
            keep[j] = false;
        }
    }
    let mut kept = keep.iter();
    candidates.retain(|_| *kept.next().unwrap());

    let onsets = candidates
        .into_iter()
        .filter_map(|idx| {
            let uncertainty_ms = peak_half_width_ms(v, idx, env.sample_rate);
            (uncertainty_ms <= params.max_uncertainty_ms).then(|| Onset {
                time_s: env.time_of(idx),
                amplitude: v[idx].clamp(0.0, 1.0),
                label: Label::Unknown,
                source: Source::Auto,
                uncertainty_ms,
            })
        })
        .collect();
    Ok(OnsetSeries { onsets })
}

/// Indices of local maxima at or above `threshold`. A plateau reports its
/// first sample.
fn local_maxima(v: &[f64], threshold: f64) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = v.len();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] && v[i] >= threshold {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn peak_half_width_ms(v: &[f64], idx: usize, sample_rate: f64) -> f64 {
    let level = 0.9 * v[idx];
    let mut left = idx;
    while left > 0 && v[left - 1] >= level {
        left -= 1;
    }
    let mut right = idx;
    while right + 1 < v.len() && v[right + 1] >= level {
        right += 1;
    }
    0.5 * (right - left) as f64 / sample_rate * 1000.0
}

/// Collapse every run of onsets whose consecutive gaps are below
/// `window_ms` onto the run's first onset, keeping the run's largest
/// amplitude.
pub fn merge_close_onsets(series: &OnsetSeries, window_ms: f64) -> OnsetSeries {
    let window_s = window_ms / 1000.0;
    let mut out: Vec<Onset> = Vec::with_capacity(series.len());
    let mut prev_time = f64::NEG_INFINITY;
    for o in &series.onsets {
        match out.last_mut() {
            Some(head) if o.time_s - prev_time < window_s - TIME_EPS_S => {
                head.amplitude = head.amplitude.max(o.amplitude);
            }
            _ => out.push(*o),
        }
        prev_time = o.time_s;
    }
    OnsetSeries { onsets: out }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Add,
    Remove,
    Move,
    Relabel,
}

impl FromStr for EditKind {
    type Err = GrooveError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "add" => Ok(EditKind::Add),
            "remove" => Ok(EditKind::Remove),
            "move" => Ok(EditKind::Move),
            "relabel" => Ok(EditKind::Relabel),
            other => Err(GrooveError::Csv(format!("unknown edit kind '{other}'"))),
        }
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EditKind::Add => "add",
            EditKind::Remove => "remove",
            EditKind::Move => "move",
            EditKind::Relabel => "relabel",
        })
    }
}

/// One manual correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationEdit {
    pub kind: EditKind,
    pub target_time_s: f64,
    pub new_time_s: Option<f64>,
    pub label: Option<Label>,
}

impl AnnotationEdit {
    pub fn add(time_s: f64, label: Option<Label>) -> Self {
        Self {
            kind: EditKind::Add,
            target_time_s: time_s,
            new_time_s: None,
            label,
        }
    }

    pub fn remove(time_s: f64) -> Self {
        Self {
            kind: EditKind::Remove,
            target_time_s: time_s,
            new_time_s: None,
            label: None,
        }
    }

    pub fn move_to(from_s: f64, to_s: f64) -> Self {
        Self {
            kind: EditKind::Move,
            target_time_s: from_s,
            new_time_s: Some(to_s),
            label: None,
        }
    }

    pub fn relabel(time_s: f64, label: Label) -> Self {
        Self {
            kind: EditKind::Relabel,
            target_time_s: time_s,
            new_time_s: None,
            label: Some(label),
        }
    }
}

/// Apply edits in order. Added onsets read their amplitude from `envelope`
/// when one is given and otherwise get amplitude 0.
pub fn apply_edits(
    series: &OnsetSeries,
    edits: &[AnnotationEdit],
    envelope: Option<&EnvelopeSignal>,
) -> Result<OnsetSeries> {
    let tol_s = EDIT_RESOLVE_MS / 1000.0;
    let mut out = series.clone();

    for (index, edit) in edits.iter().enumerate() {
        let fail = |reason: String| GrooveError::Edit { index, reason };
        if !edit.target_time_s.is_finite() {
            return Err(fail("target time is not finite".into()));
        }
        let resolve = |s: &OnsetSeries| {
            s.nearest_within(edit.target_time_s, tol_s).ok_or_else(|| {
                fail(format!(
                    "no onset within {EDIT_RESOLVE_MS} ms of {:.6} s",
                    edit.target_time_s
                ))
            })
        };

        match edit.kind {
            EditKind::Add => {
                let amplitude = envelope
                    .and_then(|env| env.value_at(edit.target_time_s))
                    .unwrap_or(0.0);
                let onset = Onset {
                    time_s: edit.target_time_s,
                    amplitude,
                    label: edit.label.unwrap_or(Label::Unknown),
                    source: Source::ManualAdd,
                    uncertainty_ms: 0.0,
                };
                insert_sorted(&mut out, onset).map_err(fail)?;
            }
            EditKind::Remove => {
                let i = resolve(&out)?;
                out.onsets.remove(i);
            }
            EditKind::Move => {
                let to = edit
                    .new_time_s
                    .filter(|t| t.is_finite())
                    .ok_or_else(|| fail("move needs a new time".into()))?;
                let i = resolve(&out)?;
                let mut onset = out.onsets.remove(i);
                onset.time_s = to;
                onset.source = Source::ManualMove;
                insert_sorted(&mut out, onset).map_err(fail)?;
            }
            EditKind::Relabel => {
                let label = edit
                    .label
                    .ok_or_else(|| fail("relabel needs a label".into()))?;
                let i = resolve(&out)?;
                out.onsets[i].label = label;
            }
        }
    }
    Ok(out)
}

fn insert_sorted(series: &mut OnsetSeries, onset: Onset) -> std::result::Result<(), String> {
    let idx = series.onsets.partition_point(|o| o.time_s < onset.time_s);
    if series.onsets.get(idx).is_some_and(|o| o.time_s == onset.time_s) {
        return Err(format!("an onset already exists at {:.6} s", onset.time_s));
    }
    series.onsets.insert(idx, onset);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_from(values: Vec<f64>, sr: f64) -> EnvelopeSignal {
        EnvelopeSignal {
            values,
            sample_rate: sr,
            source_max: 1.0,
            silent: false,
        }
    }

    fn bump(values: &mut [f64], center: usize, height: f64, half: usize) {
        for k in 0..=half {
            let h = height * (1.0 - k as f64 / (half as f64 + 1.0));
            values[center + k] = values[center + k].max(h);
            values[center - k] = values[center - k].max(h);
        }
    }

    #[test]
    fn single_peak_is_found() {
        let sr = 1000.0;
        let mut v = vec![0.0; 2000];
        bump(&mut v, 1000, 0.8, 3);
        let out = detect_onsets(&env_from(v, sr), &DetectParams::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.onsets[0].time_s, 1.0);
        assert_eq!(out.onsets[0].amplitude, 0.8);
        assert_eq!(out.onsets[0].source, Source::Auto);
        assert_eq!(out.onsets[0].label, Label::Unknown);
    }

    #[test]
    fn sub_threshold_peak_is_ignored() {
        let sr = 1000.0;
        let mut v = vec![0.0; 2000];
        bump(&mut v, 500, 0.9, 3);
        bump(&mut v, 1500, 0.05, 3);
        let out = detect_onsets(&env_from(v, sr), &DetectParams::default()).unwrap();
        assert_eq!(out.times(), vec![0.5]);
    }

    #[test]
    fn refractory_keeps_stronger_peak() {
        let sr = 1000.0;
        let mut v = vec![0.0; 1000];
        bump(&mut v, 500, 0.5, 3);
        bump(&mut v, 520, 0.9, 3);
        let out = detect_onsets(&env_from(v, sr), &DetectParams::default()).unwrap();
        assert_eq!(out.times(), vec![0.52]);
    }

    #[test]
    fn plateau_reports_first_sample() {
        let v = vec![0.0, 0.5, 0.5, 0.5, 0.2, 0.0];
        assert_eq!(local_maxima(&v, 0.1), vec![1]);
    }

    #[test]
    fn wide_peaks_are_discarded() {
        let sr = 1000.0;
        let mut v = vec![0.0; 1000];
        // 90% width of ~20 ms, half-width ~10 ms
        bump(&mut v, 500, 1.0, 150);
        let out = detect_onsets(&env_from(v, sr), &DetectParams::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn silent_envelope_yields_empty_series() {
        let env = EnvelopeSignal {
            values: vec![0.0; 100],
            sample_rate: 1000.0,
            source_max: 0.0,
            silent: true,
        };
        assert!(detect_onsets(&env, &DetectParams::default()).unwrap().is_empty());
    }

    #[test]
    fn bad_detection_parameters() {
        let env = env_from(vec![0.0; 10], 1000.0);
        let p = DetectParams {
            threshold: 1.0,
            ..DetectParams::default()
        };
        assert!(detect_onsets(&env, &p).is_err());
        let p = DetectParams {
            refractory_ms: 0.0,
            ..DetectParams::default()
        };
        assert!(detect_onsets(&env, &p).is_err());
    }

    #[test]
    fn merge_keeps_first_hit() {
        let s = OnsetSeries::from_times(&[1.000, 1.002]).unwrap();
        assert_eq!(merge_close_onsets(&s, 3.0).times(), vec![1.000]);
        let s = OnsetSeries::from_times(&[1.000, 1.010]).unwrap();
        assert_eq!(merge_close_onsets(&s, 3.0).len(), 2);
    }

    #[test]
    fn merge_run_takes_max_amplitude() {
        let s = OnsetSeries::new(vec![
            Onset::new(1.000, 0.3),
            Onset::new(1.002, 0.5),
            Onset::new(1.004, 0.2),
        ])
        .unwrap();
        let m = merge_close_onsets(&s, 3.0);
        assert_eq!(m.len(), 1);
        assert_eq!(m.onsets[0].time_s, 1.000);
        assert_eq!(m.onsets[0].amplitude, 0.5);
    }

    #[test]
    fn remove_resolves_within_tolerance() {
        let s = OnsetSeries::from_times(&[1.0, 2.001, 3.0]).unwrap();
        let out = apply_edits(&s, &[AnnotationEdit::remove(2.000)], None).unwrap();
        assert_eq!(out.times(), vec![1.0, 3.0]);
    }

    #[test]
    fn add_into_empty_series() {
        let out = apply_edits(
            &OnsetSeries::default(),
            &[AnnotationEdit::add(3.5, None)],
            None,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        let o = out.onsets[0];
        assert_eq!(o.time_s, 3.5);
        assert_eq!(o.amplitude, 0.0);
        assert_eq!(o.label, Label::Unknown);
        assert_eq!(o.source, Source::ManualAdd);
    }

    #[test]
    fn add_reads_amplitude_from_envelope() {
        let env = env_from((0..1000).map(|i| i as f64 / 1000.0).collect(), 1000.0);
        let out = apply_edits(
            &OnsetSeries::default(),
            &[AnnotationEdit::add(0.25, Some(Label::Ghost))],
            Some(&env),
        )
        .unwrap();
        assert_eq!(out.onsets[0].amplitude, 0.25);
        assert_eq!(out.onsets[0].label, Label::Ghost);
    }

    #[test]
    fn move_replaces_time() {
        let s = OnsetSeries::from_times(&[1.0, 2.0, 3.0]).unwrap();
        let out = apply_edits(&s, &[AnnotationEdit::move_to(2.0, 2.004)], None).unwrap();
        let times = out.times();
        assert!(times.contains(&2.004));
        assert!(!times.contains(&2.0));
        assert_eq!(out.onsets[1].source, Source::ManualMove);
    }

    #[test]
    fn move_past_neighbour_resorts() {
        let s = OnsetSeries::from_times(&[1.0, 2.0, 3.0]).unwrap();
        let out = apply_edits(&s, &[AnnotationEdit::move_to(1.0, 2.5)], None).unwrap();
        assert_eq!(out.times(), vec![2.0, 2.5, 3.0]);
    }

    #[test]
    fn unresolvable_edit_names_its_index() {
        let s = OnsetSeries::from_times(&[1.0, 2.0]).unwrap();
        let edits = [AnnotationEdit::remove(1.0), AnnotationEdit::remove(1.5)];
        match apply_edits(&s, &edits, None) {
            Err(GrooveError::Edit { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected edit error, got {other:?}"),
        }
    }

    #[test]
    fn relabel_changes_label_only() {
        let s = OnsetSeries::from_times(&[1.0]).unwrap();
        let out = apply_edits(&s, &[AnnotationEdit::relabel(1.003, Label::Snare)], None).unwrap();
        assert_eq!(out.onsets[0].label, Label::Snare);
        assert_eq!(out.onsets[0].time_s, 1.0);
    }

    #[test]
    fn series_rejects_unsorted_times() {
        assert!(OnsetSeries::from_times(&[1.0, 1.0]).is_err());
        assert!(OnsetSeries::new(vec![Onset::new(0.0, 1.5)]).is_err());
    }
}
