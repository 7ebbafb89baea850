//! End-to-end pipelines: audio to onsets, and onsets to an analysis report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dfa::{self, DfaParams, FluctuationResult};
use crate::error::{GrooveError, Result};
use crate::metric::{
    classify_intervals, estimate_base_unit, interval_stats, intervals, BeatClass, IntervalSeries,
    IntervalStats, SectionMap, DEFAULT_HISTOGRAM_BIN_S, DEFAULT_MAX_MULTIPLE,
};
use crate::onset::{self, detect_onsets, merge_close_onsets, DetectParams, OnsetSeries};
use crate::phrase::{
    align_to_grid, phrase_amplitude_profile, phrase_interval_profile, PhraseProfile,
    PhraseTemplate, DEFAULT_PHRASE_POSITIONS,
};
use crate::rhythm::{compute_drift, swing_ratio, DriftMode, DriftSeries, DriftSummary, SwingReport};
use crate::signal::{self, envelope, highpass, AudioClip};

/// Fewest onsets the analysis accepts.
pub const MIN_ONSETS: usize = 8;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionSettings {
    pub cutoff_hz: f64,
    pub smoothing_ms: f64,
    pub threshold: f64,
    pub refractory_ms: f64,
    pub merge_ms: f64,
    pub max_uncertainty_ms: f64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        Self {
            cutoff_hz: signal::DEFAULT_CUTOFF_HZ,
            smoothing_ms: signal::DEFAULT_SMOOTHING_MS,
            threshold: onset::DEFAULT_THRESHOLD,
            refractory_ms: onset::DEFAULT_REFRACTORY_MS,
            merge_ms: onset::DEFAULT_MERGE_MS,
            max_uncertainty_ms: onset::MAX_UNCERTAINTY_MS,
        }
    }
}

/// High-pass, envelope, peak picking and double-hit merge.
pub fn detect_from_clip(clip: &AudioClip, settings: &DetectionSettings) -> Result<OnsetSeries> {
    let filtered = highpass(clip, settings.cutoff_hz)?;
    let env = envelope(&filtered, settings.smoothing_ms)?;
    let detected = detect_onsets(
        &env,
        &DetectParams {
            threshold: settings.threshold,
            refractory_ms: settings.refractory_ms,
            max_uncertainty_ms: settings.max_uncertainty_ms,
        },
    )?;
    Ok(merge_close_onsets(&detected, settings.merge_ms))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisParams {
    pub max_multiple: f64,
    pub bpm_hint: Option<f64>,
    pub histogram_bin_s: f64,
    pub drift_mode: DriftMode,
    pub phrase_positions: usize,
    pub dfa: DfaParams,
    /// Run interval DFA on raw τ instead of τ divided by its class multiple.
    pub dfa_raw_intervals: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            max_multiple: DEFAULT_MAX_MULTIPLE,
            bpm_hint: None,
            histogram_bin_s: DEFAULT_HISTOGRAM_BIN_S,
            drift_mode: DriftMode::Normalized,
            phrase_positions: DEFAULT_PHRASE_POSITIONS,
            dfa: DfaParams::default(),
            dfa_raw_intervals: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDescriptor {
    pub path: String,
    /// `audio`, `annotations` or `synthetic`.
    pub kind: String,
    pub sample_rate: Option<f64>,
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalCounts {
    pub raw: usize,
    pub single: usize,
    pub double: usize,
    pub triple: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSummary {
    pub count: usize,
    pub mean_ms: Option<f64>,
    pub std_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitRanges {
    pub alpha1: (usize, usize),
    pub alpha2: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitQuality {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfaSummary {
    pub n: usize,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub alpha_global: Option<f64>,
    /// Requested fit ranges.
    pub s_ranges: FitRanges,
    pub r_squared: FitQuality,
    pub degenerate: bool,
    /// Why no fluctuation function was computed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub mode: DriftMode,
    #[serde(flatten)]
    pub summary: DriftSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhraseReport {
    pub interval: PhraseProfile,
    pub amplitude: PhraseProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportParameters {
    pub detection: Option<DetectionSettings>,
    pub analysis: AnalysisParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub input: InputDescriptor,
    pub parameters: ReportParameters,
    pub onset_count: usize,
    pub interval_counts: IntervalCounts,
    pub detection_rate: f64,
    pub base_unit_ms: f64,
    pub classes: BTreeMap<String, ClassSummary>,
    pub swing: Option<SwingReport>,
    pub swing_error: Option<String>,
    pub drift: DriftReport,
    pub dfa: BTreeMap<String, DfaSummary>,
    pub phrase: PhraseReport,
}

/// Report plus the intermediate data behind every number in it.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub onsets: OnsetSeries,
    pub intervals: IntervalSeries,
    pub stats: IntervalStats,
    pub drift: DriftSeries,
    /// Input series and result for each DFA target, keyed like the report.
    pub dfa: BTreeMap<String, (Vec<f64>, Option<FluctuationResult>)>,
}

/// Names of the DFA targets, in report order.
pub const DFA_SERIES: [&str; 5] = ["intervals", "singles", "doubles", "triples", "amplitudes"];

fn dfa_inputs(onsets: &OnsetSeries, classified: &IntervalSeries, raw: bool) -> Vec<(String, Vec<f64>)> {
    let all = if raw {
        classified
            .intervals
            .iter()
            .filter(|iv| iv.valid)
            .map(|iv| iv.tau_s)
            .collect()
    } else {
        classified.valid_normalized()
    };
    vec![
        ("intervals".into(), all),
        ("singles".into(), classified.class_taus(BeatClass::Single)),
        ("doubles".into(), classified.class_taus(BeatClass::Double)),
        ("triples".into(), classified.class_taus(BeatClass::Triple)),
        ("amplitudes".into(), onsets.amplitudes()),
    ]
}

fn summarize_dfa(n: usize, result: &std::result::Result<FluctuationResult, GrooveError>, p: &DfaParams) -> DfaSummary {
    let ranges = FitRanges {
        alpha1: p.short_range,
        alpha2: p.long_range,
    };
    match result {
        Ok(r) => DfaSummary {
            n,
            alpha1: r.alpha1.map(|f| f.alpha),
            alpha2: r.alpha2.map(|f| f.alpha),
            alpha_global: r.alpha_global.map(|f| f.alpha),
            s_ranges: ranges,
            r_squared: FitQuality {
                alpha1: r.alpha1.map(|f| f.r_squared),
                alpha2: r.alpha2.map(|f| f.r_squared),
            },
            degenerate: r.degenerate,
            error: None,
        },
        Err(e) => DfaSummary {
            n,
            alpha1: None,
            alpha2: None,
            alpha_global: None,
            s_ranges: ranges,
            r_squared: FitQuality {
                alpha1: None,
                alpha2: None,
            },
            degenerate: false,
            error: Some(e.to_string()),
        },
    }
}

fn class_summary(stats: &IntervalStats, klass: BeatClass) -> ClassSummary {
    let s = stats.get(klass).expect("valid class");
    ClassSummary {
        count: s.count,
        mean_ms: s.mean_s.map(|m| m * 1000.0),
        std_ms: s.std_s.map(|m| m * 1000.0),
    }
}

/// Classify → stats → swing → drift → phrase profiles → DFA.
///
/// Fails with [`GrooveError::EmptyInput`] below [`MIN_ONSETS`] onsets.
/// Swing and DFA problems are recorded in the report instead of failing.
pub fn analyze_onsets(
    onsets: &OnsetSeries,
    sections: Option<&SectionMap>,
    params: &AnalysisParams,
    input: InputDescriptor,
    detection: Option<DetectionSettings>,
) -> Result<Analysis> {
    if onsets.len() < MIN_ONSETS {
        return Err(GrooveError::EmptyInput(format!(
            "{} onsets found, at least {MIN_ONSETS} are needed",
            onsets.len()
        )));
    }
    let raw = intervals(onsets)?;
    let base = estimate_base_unit(&raw, params.bpm_hint, params.max_multiple)?;
    let classified = classify_intervals(&raw, base, params.max_multiple)?;
    let stats = interval_stats(&classified, params.histogram_bin_s);

    let (swing, swing_error) = match swing_ratio(&classified) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let drift = compute_drift(&classified, base, params.drift_mode)?;

    let template = PhraseTemplate::shuffle(params.phrase_positions)?;
    let grid = align_to_grid(onsets, &classified, base, sections)?;
    let phrase = PhraseReport {
        interval: phrase_interval_profile(onsets, &grid, &template)?,
        amplitude: phrase_amplitude_profile(onsets, &grid, &template)?,
    };

    let mut dfa_out = BTreeMap::new();
    let mut dfa_summary = BTreeMap::new();
    for (name, series) in dfa_inputs(onsets, &classified, params.dfa_raw_intervals) {
        let result = dfa::analyze(&series, &params.dfa);
        dfa_summary.insert(name.clone(), summarize_dfa(series.len(), &result, &params.dfa));
        dfa_out.insert(name, (series, result.ok()));
    }

    let count = |k: BeatClass| classified.intervals.iter().filter(|iv| iv.klass == Some(k)).count();
    let interval_counts = IntervalCounts {
        raw: classified.len(),
        single: count(BeatClass::Single),
        double: count(BeatClass::Double),
        triple: count(BeatClass::Triple),
        discarded: count(BeatClass::Discarded),
    };
    let classes = BeatClass::VALID
        .iter()
        .map(|&k| (k.to_string(), class_summary(&stats, k)))
        .collect();

    let report = AnalysisReport {
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        input,
        parameters: ReportParameters {
            detection,
            analysis: params.clone(),
        },
        onset_count: onsets.len(),
        interval_counts,
        detection_rate: stats.detection_rate,
        base_unit_ms: base * 1000.0,
        classes,
        swing,
        swing_error,
        drift: DriftReport {
            mode: drift.mode,
            summary: drift.summary(),
        },
        dfa: dfa_summary,
        phrase,
    };
    Ok(Analysis {
        report,
        onsets: onsets.clone(),
        intervals: classified,
        stats,
        drift,
        dfa: dfa_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_shuffle_onsets, GrooveSpec};

    fn input() -> InputDescriptor {
        InputDescriptor {
            path: "test".into(),
            kind: "synthetic".into(),
            sample_rate: None,
            duration_s: None,
        }
    }

    #[test]
    fn too_few_onsets_refused() {
        let s = OnsetSeries::from_times(&[0.0, 0.1, 0.2]).unwrap();
        assert!(matches!(
            analyze_onsets(&s, None, &AnalysisParams::default(), input(), None),
            Err(GrooveError::EmptyInput(_))
        ));
    }

    #[test]
    fn metronomic_shuffle_report() {
        let spec = GrooveSpec {
            bars: 60,
            closing_downbeat: true,
            ..GrooveSpec::default()
        };
        let g = gen_shuffle_onsets(&spec, 0).unwrap();
        let a = analyze_onsets(&g.onsets, None, &AnalysisParams::default(), input(), None).unwrap();
        let r = &a.report;
        assert_eq!(r.onset_count, 481);
        assert_eq!(r.interval_counts.single, 240);
        assert_eq!(r.interval_counts.double, 240);
        assert!((r.swing.as_ref().unwrap().swing_ratio - 2.0).abs() < 1e-9);
        assert!(r.drift.summary.max_abs_s < 1e-6);
        assert!((r.base_unit_ms - 1000.0 * 60.0 / 504.0).abs() < 1e-6);
        assert_eq!(r.phrase.interval.complete_phrases, 30);
        assert!(r.dfa["doubles"].error.is_none());
        assert_eq!(r.dfa.len(), DFA_SERIES.len());
    }
}
