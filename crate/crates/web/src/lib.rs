//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export runs one pipeline on generated data and returns a JSON
//! string for the page to plot. The `*_json` functions hold the logic so
//! they can be tested natively.

use groovescope::dfa::{self, DfaParams, FluctuationResult};
use groovescope::report::{analyze_onsets, AnalysisParams, InputDescriptor};
use groovescope::synth::{gen_crossover_series, gen_powerlaw_noise, gen_shuffle_onsets, GrooveSpec, SHUFFLE_PHRASE_PATTERN};
use groovescope::{GrooveError, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest series the page may request; keeps a click responsive.
const MAX_SERIES: usize = 1 << 16;

#[derive(Debug, Serialize)]
pub struct DfaView {
    pub scales: Vec<usize>,
    #[serde(rename = "F")]
    pub fluctuation: Vec<f64>,
    pub local_s: Vec<usize>,
    pub local_alpha: Vec<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub alpha_global: Option<f64>,
}

impl From<&FluctuationResult> for DfaView {
    fn from(r: &FluctuationResult) -> Self {
        Self {
            scales: r.scales.clone(),
            fluctuation: r.fluctuation.clone(),
            local_s: r.alpha_local.iter().map(|l| l.s).collect(),
            local_alpha: r.alpha_local.iter().map(|l| l.alpha).collect(),
            alpha1: r.alpha1.map(|f| f.alpha),
            alpha2: r.alpha2.map(|f| f.alpha),
            alpha_global: r.alpha_global.map(|f| f.alpha),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PowerLawDemo {
    pub beta: f64,
    pub expected_alpha: f64,
    pub series_head: Vec<f64>,
    pub dfa: DfaView,
}

#[derive(Debug, Serialize)]
pub struct CrossoverDemo {
    pub period: usize,
    /// First scale whose local exponent reaches the midpoint of α₁ and α₂.
    pub transition_s: Option<usize>,
    pub dfa: DfaView,
}

#[derive(Debug, Serialize)]
pub struct GrooveDemo {
    pub onset_count: usize,
    pub base_unit_ms: f64,
    pub counts: [usize; 4],
    pub class_means_ms: [Option<f64>; 3],
    pub swing_ratio: Option<f64>,
    pub drift_time_s: Vec<f64>,
    pub drift_ms: Vec<f64>,
    pub drift_gap: Vec<bool>,
    pub phrase_deviation_pct: Vec<Option<f64>>,
    pub intervals: DfaView,
}

fn check_length(n: usize) -> Result<()> {
    if !(64..=MAX_SERIES).contains(&n) {
        return Err(GrooveError::Parameter(format!("length must lie in [64, {MAX_SERIES}], got {n}")));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| GrooveError::Format(e.to_string()))
}

/// Power-law noise and its fluctuation function.
pub fn powerlaw_json(beta: f64, n: usize, seed: u64) -> Result<String> {
    check_length(n)?;
    let x = gen_powerlaw_noise(beta, n, seed)?;
    let r = dfa::analyze(&x, &DfaParams::default())?;
    to_json(&PowerLawDemo {
        beta,
        expected_alpha: (beta + 1.0) / 2.0,
        series_head: x.iter().take(512).copied().collect(),
        dfa: (&r).into(),
    })
}

/// Two-bar phrase pattern blended with power-law noise.
pub fn crossover_json(mix: f64, beta: f64, n: usize, seed: u64) -> Result<String> {
    check_length(n)?;
    let x = gen_crossover_series(n, &SHUFFLE_PHRASE_PATTERN, beta, mix, seed)?;
    let r = dfa::analyze(&x, &DfaParams::default())?;
    let transition_s = match (r.alpha1, r.alpha2) {
        (Some(a1), Some(a2)) => {
            let mid = 0.5 * (a1.alpha + a2.alpha);
            r.alpha_local.iter().find(|l| l.alpha >= mid).map(|l| l.s)
        }
        _ => None,
    };
    to_json(&CrossoverDemo {
        period: SHUFFLE_PHRASE_PATTERN.len(),
        transition_s,
        dfa: (&r).into(),
    })
}

/// Synthetic shuffle through the full onset analysis.
pub fn groove_json(swing: f64, jitter_ms: f64, beta: f64, bars: usize, seed: u64) -> Result<String> {
    if !(1..=400).contains(&bars) {
        return Err(GrooveError::Parameter(format!("bars must lie in [1, 400], got {bars}")));
    }
    let spec = GrooveSpec {
        swing_ratio: swing,
        jitter_sigma_ms: jitter_ms,
        lrc_beta: beta,
        bars,
        closing_downbeat: true,
        ..GrooveSpec::default()
    };
    let g = gen_shuffle_onsets(&spec, seed)?;
    let input = InputDescriptor {
        path: "browser".into(),
        kind: "synthetic".into(),
        sample_rate: None,
        duration_s: None,
    };
    let a = analyze_onsets(&g.onsets, None, &AnalysisParams::default(), input, None)?;
    let r = &a.report;
    let c = r.interval_counts;
    let mean = |k: &str| r.classes.get(k).and_then(|c| c.mean_ms);
    let intervals = match &a.dfa["intervals"].1 {
        Some(res) => res.into(),
        None => DfaView::from(&FluctuationResult {
            scales: vec![],
            fluctuation: vec![],
            detrend_order: 1,
            tiling: Default::default(),
            degenerate: true,
            alpha1: None,
            alpha2: None,
            alpha_global: None,
            alpha_local: vec![],
        }),
    };
    to_json(&GrooveDemo {
        onset_count: r.onset_count,
        base_unit_ms: r.base_unit_ms,
        counts: [c.single, c.double, c.triple, c.discarded],
        class_means_ms: [mean("single"), mean("double"), mean("triple")],
        swing_ratio: r.swing.as_ref().map(|s| s.swing_ratio),
        drift_time_s: a.drift.points.iter().map(|p| p.time_s).collect(),
        drift_ms: a.drift.points.iter().map(|p| p.d_s * 1000.0).collect(),
        drift_gap: a.drift.points.iter().map(|p| p.gap).collect(),
        phrase_deviation_pct: r.phrase.interval.positions.iter().map(|p| p.deviation_pct).collect(),
        intervals,
    })
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn dfa_demo(beta: f64, n: usize, seed: u32) -> std::result::Result<String, JsError> {
    js(powerlaw_json(beta, n, seed as u64))
}

#[wasm_bindgen]
pub fn crossover_demo(mix: f64, beta: f64, n: usize, seed: u32) -> std::result::Result<String, JsError> {
    js(crossover_json(mix, beta, n, seed as u64))
}

#[wasm_bindgen]
pub fn groove_demo(swing: f64, jitter_ms: f64, beta: f64, bars: usize, seed: u32) -> std::result::Result<String, JsError> {
    js(groove_json(swing, jitter_ms, beta, bars, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn powerlaw_demo_reports_exponent() {
        let v = parse(powerlaw_json(1.0, 8192, 3).unwrap());
        let a = v["dfa"]["alpha_global"].as_f64().unwrap();
        assert!((a - 1.0).abs() < 0.1, "{a}");
        assert_eq!(v["dfa"]["scales"].as_array().unwrap().len(), v["dfa"]["F"].as_array().unwrap().len());
        assert_eq!(v["series_head"].as_array().unwrap().len(), 512);
    }

    #[test]
    fn crossover_demo_finds_transition() {
        let v = parse(crossover_json(0.5, 1.4, 8192, 0).unwrap());
        let s = v["transition_s"].as_u64().unwrap();
        assert!((16..=40).contains(&s), "{s}");
        assert!(v["dfa"]["alpha2"].as_f64().unwrap() - v["dfa"]["alpha1"].as_f64().unwrap() >= 0.25);
    }

    #[test]
    fn groove_demo_recovers_swing() {
        let v = parse(groove_json(1.79, 5.0, 0.0, 60, 1).unwrap());
        assert!((v["swing_ratio"].as_f64().unwrap() - 1.79).abs() <= 0.03);
        assert_eq!(v["onset_count"].as_u64(), Some(481));
        assert_eq!(v["phrase_deviation_pct"].as_array().unwrap().len(), 16);
        assert_eq!(v["drift_ms"].as_array().unwrap().len(), 480);
    }

    #[test]
    fn out_of_range_inputs_are_errors() {
        assert!(powerlaw_json(1.0, 10, 0).is_err());
        assert!(powerlaw_json(4.0, 1024, 0).is_err());
        assert!(crossover_json(1.5, 1.0, 1024, 0).is_err());
        assert!(groove_json(2.0, 0.0, 0.0, 0, 0).is_err());
    }
}
