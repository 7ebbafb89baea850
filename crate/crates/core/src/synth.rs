//! Synthetic grooves, correlated noise and click-track rendering with known
//! ground truth.
//!
//! A bar holds four triplet groups; the tempo counts two groups per beat,
//! so the triplet unit is `60 / (6 * bpm)` seconds. Hi-hat strokes fall on
//! the first and third note of every triplet, the third displaced by the
//! swing ratio.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{GrooveError, Result};
use crate::onset::{Label, Onset, OnsetSeries, Source};
use crate::signal::AudioClip;

pub const GROUPS_PER_BAR: usize = 4;
pub const GROUPS_PER_BEAT: f64 = 2.0;

/// Hi-hat dynamics over a two-bar phrase: bass and snare strokes accented,
/// otherwise a soft last note and a louder first note per triplet.
pub const DEFAULT_AMPLITUDE_PATTERN: [f64; 16] = [
    1.0, 0.3, 0.6, 0.3, 1.0, 0.3, 0.6, 0.3, 0.9, 0.3, 0.6, 0.3, 1.0, 0.3, 0.6, 0.3,
];

const GHOST_AMPLITUDE: f64 = 0.15;

/// A tempo breakpoint; tempo is linear between breakpoints and constant
/// outside them. `time_s` counts from the first stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoPoint {
    pub time_s: f64,
    pub bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrooveSpec {
    pub bpm: f64,
    /// Long/short ratio y/x inside each triplet.
    pub swing_ratio: f64,
    pub bars: usize,
    /// Standard deviation of the timing noise on each onset.
    pub jitter_sigma_ms: f64,
    /// Spectral exponent of the timing noise; 0 gives i.i.d. Gaussian jitter.
    pub lrc_beta: f64,
    /// Base amplitude per hi-hat stroke, cycled.
    pub amplitude_pattern: Vec<f64>,
    /// Relative standard deviation of multiplicative amplitude noise.
    pub amplitude_noise: f64,
    /// Piecewise-linear tempo curve; overrides `bpm` when present.
    pub drift_profile: Option<Vec<TempoPoint>>,
    /// Chance of a ghost stroke on the middle triplet note.
    pub ghost_probability: f64,
    /// Time of the first stroke.
    pub start_time_s: f64,
    /// Append the downbeat that follows the last bar, which completes the
    /// final phrase for phrase profiling.
    #[serde(default)]
    pub closing_downbeat: bool,
}

impl Default for GrooveSpec {
    fn default() -> Self {
        Self {
            bpm: 84.0,
            swing_ratio: 2.0,
            bars: 60,
            jitter_sigma_ms: 0.0,
            lrc_beta: 0.0,
            amplitude_pattern: DEFAULT_AMPLITUDE_PATTERN.to_vec(),
            amplitude_noise: 0.0,
            drift_profile: None,
            ghost_probability: 0.0,
            start_time_s: 0.5,
            closing_downbeat: false,
        }
    }
}

impl GrooveSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GrooveError::Parameter(msg));
        if !(self.bpm > 0.0 && self.bpm.is_finite()) {
            return bad(format!("bpm must be positive, got {}", self.bpm));
        }
        if !(self.swing_ratio > 0.0 && self.swing_ratio.is_finite()) {
            return bad(format!("swing ratio must be positive, got {}", self.swing_ratio));
        }
        if self.bars == 0 {
            return bad("bars must be at least 1".into());
        }
        if !(self.jitter_sigma_ms >= 0.0) {
            return bad(format!("jitter must be non-negative, got {}", self.jitter_sigma_ms));
        }
        if !(0.0..=3.0).contains(&self.lrc_beta) {
            return bad(format!("lrc beta must lie in [0, 3], got {}", self.lrc_beta));
        }
        if self.amplitude_pattern.is_empty()
            || self.amplitude_pattern.iter().any(|a| !(0.0..=1.0).contains(a))
        {
            return bad("amplitude pattern must be non-empty with values in [0, 1]".into());
        }
        if !(self.amplitude_noise >= 0.0) {
            return bad("amplitude noise must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.ghost_probability) {
            return bad("ghost probability must lie in [0, 1]".into());
        }
        if !(self.start_time_s >= 0.0) {
            return bad("start time must be non-negative".into());
        }
        if let Some(profile) = &self.drift_profile {
            if profile.is_empty() {
                return bad("drift profile needs at least one point".into());
            }
            if profile.iter().any(|p| !(p.bpm > 0.0)) {
                return bad("drift profile tempi must be positive".into());
            }
            if profile.windows(2).any(|w| w[1].time_s <= w[0].time_s) {
                return bad("drift profile times must increase".into());
            }
        }
        Ok(())
    }

    /// Triplet unit at the starting tempo.
    pub fn base_unit_s(&self) -> f64 {
        let bpm = match &self.drift_profile {
            Some(p) => p[0].bpm,
            None => self.bpm,
        };
        60.0 / (6.0 * bpm)
    }

    /// Maps group phase (triplet groups elapsed) to time since the first
    /// stroke.
    fn tempo_map(&self) -> TempoMap {
        match &self.drift_profile {
            Some(points) => TempoMap {
                points: points.clone(),
            },
            None => TempoMap {
                points: vec![TempoPoint {
                    time_s: 0.0,
                    bpm: self.bpm,
                }],
            },
        }
    }
}

struct TempoMap {
    points: Vec<TempoPoint>,
}

impl TempoMap {
    fn groups_per_s(bpm: f64) -> f64 {
        bpm * GROUPS_PER_BEAT / 60.0
    }

    /// (duration, starting bpm, bpm slope per second) from t = 0 on; the
    /// last segment is open-ended.
    fn segments(&self) -> Vec<(f64, f64, f64)> {
        let pts = &self.points;
        let mut segs = Vec::with_capacity(pts.len() + 1);
        let mut t = 0.0;
        if pts[0].time_s > 0.0 {
            segs.push((pts[0].time_s, pts[0].bpm, 0.0));
            t = pts[0].time_s;
        }
        for w in pts.windows(2) {
            if w[1].time_s <= t {
                continue;
            }
            let slope = (w[1].bpm - w[0].bpm) / (w[1].time_s - w[0].time_s);
            let start = w[0].time_s.max(t);
            segs.push((w[1].time_s - start, w[0].bpm + slope * (start - w[0].time_s), slope));
            t = w[1].time_s;
        }
        segs.push((f64::INFINITY, pts[pts.len() - 1].bpm, 0.0));
        segs
    }

    /// Time at which `phase` groups have elapsed.
    fn time_at(&self, phase: f64) -> f64 {
        let mut t = 0.0;
        let mut remaining = phase;
        for (dt, b0, slope) in self.segments() {
            let seg = if dt.is_finite() {
                Self::groups_per_s(b0) * dt + Self::groups_per_s(slope) * dt * dt / 2.0
            } else {
                f64::INFINITY
            };
            if remaining <= seg {
                return t + solve_segment(b0, slope, remaining);
            }
            remaining -= seg;
            t += dt;
        }
        unreachable!("last tempo segment is open-ended")
    }
}

/// Elapsed time to cover `phase` groups starting at tempo `b0` with tempo
/// slope `slope` (bpm per second).
fn solve_segment(b0: f64, slope: f64, phase: f64) -> f64 {
    let a = TempoMap::groups_per_s(slope) / 2.0;
    let b = TempoMap::groups_per_s(b0);
    if a.abs() < 1e-15 {
        return phase / b;
    }
    // stable root of a·t² + b·t − phase = 0
    2.0 * phase / (b + (b * b + 4.0 * a * phase).sqrt())
}

/// Noisy onsets plus the exact nominal times they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGroove {
    pub onsets: OnsetSeries,
    pub nominal_times: Vec<f64>,
    /// Grid unit of each onset counted from the first stroke.
    pub units: Vec<u64>,
    pub base_unit_s: f64,
}

/// Generate a hi-hat shuffle (and optional ghost strokes) from `spec`.
pub fn gen_shuffle_onsets(spec: &GrooveSpec, seed: u64) -> Result<SyntheticGroove> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tempo = spec.tempo_map();
    let late = spec.swing_ratio / (spec.swing_ratio + 1.0);
    let groups = spec.bars * GROUPS_PER_BAR;

    // (phase, unit, label, hi-hat index)
    let mut events: Vec<(f64, u64, Label, Option<usize>)> = Vec::with_capacity(3 * groups + 1);
    let mut hihat = 0;
    for g in 0..groups {
        let base = g as f64;
        events.push((base, 3 * g as u64, Label::Hihat, Some(hihat)));
        if spec.ghost_probability > 0.0 && rng.random::<f64>() < spec.ghost_probability {
            events.push((base + late / 2.0, 3 * g as u64 + 1, Label::Ghost, None));
        }
        events.push((base + late, 3 * g as u64 + 2, Label::Hihat, Some(hihat + 1)));
        hihat += 2;
    }
    if spec.closing_downbeat {
        events.push((groups as f64, 3 * groups as u64, Label::Hihat, Some(hihat)));
    }

    let sigma_s = spec.jitter_sigma_ms / 1000.0;
    let noise: Vec<f64> = if sigma_s == 0.0 {
        vec![0.0; events.len()]
    } else if spec.lrc_beta == 0.0 {
        let normal = Normal::new(0.0, sigma_s).expect("finite sigma");
        (0..events.len()).map(|_| normal.sample(&mut rng)).collect()
    } else {
        gen_powerlaw_noise(spec.lrc_beta, events.len(), rng.random())?
            .into_iter()
            .map(|x| x * sigma_s)
            .collect()
    };

    let mut onsets = Vec::with_capacity(events.len());
    let mut nominal_times = Vec::with_capacity(events.len());
    let mut units = Vec::with_capacity(events.len());
    for ((phase, unit, label, idx), e) in events.into_iter().zip(noise) {
        let nominal = spec.start_time_s + tempo.time_at(phase);
        let base_amp = match idx {
            Some(i) => spec.amplitude_pattern[i % spec.amplitude_pattern.len()],
            None => GHOST_AMPLITUDE,
        };
        let factor: f64 = if spec.amplitude_noise > 0.0 {
            1.0 + spec.amplitude_noise * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        } else {
            1.0
        };
        onsets.push(Onset {
            time_s: nominal + e,
            amplitude: (base_amp * factor).clamp(0.0, 1.0),
            label,
            source: Source::Auto,
            uncertainty_ms: 0.0,
        });
        nominal_times.push(nominal);
        units.push(unit);
    }
    Ok(SyntheticGroove {
        onsets: OnsetSeries::new(onsets)?,
        nominal_times,
        units,
        base_unit_s: spec.base_unit_s(),
    })
}

/// Unit-variance noise with power spectrum ∝ 1/f^β by spectral synthesis:
/// magnitudes f^(−β/2) with uniformly random phases. The spectrum is built
/// four times longer than needed and truncated, so the output is not
/// forced to be periodic.
pub fn gen_powerlaw_noise(beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..=3.0).contains(&beta) {
        return Err(GrooveError::Parameter(format!("beta must lie in [0, 3], got {beta}")));
    }
    if n < 2 {
        return Err(GrooveError::Parameter(format!("need at least 2 samples, got {n}")));
    }
    let len = 4 * n.next_power_of_two();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = vec![Complex::new(0.0, 0.0); len];
    for k in 1..=len / 2 {
        let mag = (k as f64).powf(-beta / 2.0);
        if k == len / 2 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            spectrum[k] = Complex::new(sign * mag, 0.0);
        } else {
            let phase = 2.0 * PI * rng.random::<f64>();
            let c = Complex::from_polar(mag, phase);
            spectrum[k] = c;
            spectrum[len - k] = c.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut spectrum);

    let mut out: Vec<f64> = spectrum[..n].iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    for x in out.iter_mut() {
        *x = if sd > 0.0 { (*x - mean) / sd } else { 0.0 };
    }
    Ok(out)
}

/// Interval-like series of a two-bar shuffle phrase: the long/short
/// alternation with a longer gap before each snare stroke.
pub const SHUFFLE_PHRASE_PATTERN: [f64; 24] = [
    1.0, -1.0, 1.0, -0.8, 1.0, -1.0, 1.0, -0.6, 1.0, -1.0, 1.0, -0.8, //
    1.0, -1.0, 1.0, -0.8, 1.0, -1.0, 1.0, -0.6, 1.0, -1.0, 1.0, -0.8,
];

/// A repeating phrase pattern blended with power-law noise:
/// `(1 − mix) · pattern + mix · noise`, both standardized. The periodic
/// part has bounded integrated fluctuations, so it dominates DFA at short
/// scales while the noise takes over at long ones.
pub fn gen_crossover_series(
    n: usize,
    phrase_pattern: &[f64],
    lrc_beta: f64,
    mix: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if phrase_pattern.len() < 2 {
        return Err(GrooveError::Parameter("phrase pattern needs at least 2 values".into()));
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(GrooveError::Parameter(format!("mix must lie in [0, 1], got {mix}")));
    }
    let p = phrase_pattern.len() as f64;
    let pm = phrase_pattern.iter().sum::<f64>() / p;
    let psd = (phrase_pattern.iter().map(|x| (x - pm).powi(2)).sum::<f64>() / p).sqrt();
    if psd == 0.0 {
        return Err(GrooveError::Parameter("phrase pattern is constant".into()));
    }
    let noise = if mix > 0.0 {
        gen_powerlaw_noise(lrc_beta, n, seed)?
    } else {
        vec![0.0; n]
    };
    Ok((0..n)
        .map(|i| {
            let pat = (phrase_pattern[i % phrase_pattern.len()] - pm) / psd;
            (1.0 - mix) * pat + mix * noise[i]
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickParams {
    /// Length of each burst.
    pub click_ms: f64,
    /// Burst carrier; clamped below Nyquist.
    pub carrier_hz: f64,
    /// Broadband noise RMS relative to the loudest click peak.
    pub noise_db: Option<f64>,
    /// Silence appended after the last click.
    pub tail_s: f64,
    pub seed: u64,
}

impl Default for ClickParams {
    fn default() -> Self {
        Self {
            click_ms: 8.0,
            carrier_hz: 6000.0,
            noise_db: None,
            tail_s: 0.5,
            seed: 0,
        }
    }
}

/// Render each onset as a Hann-windowed sine burst centred on its time,
/// scaled by its amplitude. Overlapping bursts add.
pub fn render_clicks(onsets: &OnsetSeries, sample_rate: f64, params: &ClickParams) -> Result<AudioClip> {
    if sample_rate < 8000.0 {
        return Err(GrooveError::Parameter(format!(
            "sample rate must be at least 8 kHz, got {sample_rate}"
        )));
    }
    if !(params.click_ms > 0.0) {
        return Err(GrooveError::Parameter("click length must be positive".into()));
    }
    let half = params.click_ms / 2000.0;
    let carrier = params.carrier_hz.min(0.4 * sample_rate);
    let end = onsets.onsets.last().map_or(0.0, |o| o.time_s + half) + params.tail_s.max(0.0);
    let len = (end * sample_rate).ceil() as usize;
    let mut samples = vec![0.0; len];

    for o in &onsets.onsets {
        let first = ((o.time_s - half) * sample_rate).ceil().max(0.0) as usize;
        let last = (((o.time_s + half) * sample_rate).floor() as usize).min(len.saturating_sub(1));
        for (i, s) in samples.iter_mut().enumerate().take(last + 1).skip(first) {
            let dt = i as f64 / sample_rate - o.time_s;
            let window = 0.5 * (1.0 + (PI * dt / half).cos());
            *s += o.amplitude * window * (2.0 * PI * carrier * dt).sin();
        }
    }

    if let Some(db) = params.noise_db {
        let peak = onsets.onsets.iter().map(|o| o.amplitude).fold(0.0, f64::max);
        let rms = peak * 10f64.powf(db / 20.0);
        if rms > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let normal = Normal::new(0.0, rms).expect("finite noise level");
            for s in samples.iter_mut() {
                *s += normal.sample(&mut rng);
            }
        }
    }
    AudioClip::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bar_exact_swing() {
        let spec = GrooveSpec {
            bars: 1,
            start_time_s: 0.0,
            ..GrooveSpec::default()
        };
        let g = gen_shuffle_onsets(&spec, 1).unwrap();
        assert_eq!(g.onsets.len(), 8);
        let t = g.onsets.times();
        let unit = 60.0 / (6.0 * 84.0);
        for (i, w) in t.windows(2).enumerate() {
            let expect = if i % 2 == 0 { 2.0 * unit } else { unit };
            assert!((w[1] - w[0] - expect).abs() < 1e-12);
        }
        assert_eq!(g.units, vec![0, 2, 3, 5, 6, 8, 9, 11]);
        let closed = GrooveSpec {
            closing_downbeat: true,
            ..spec
        };
        let g = gen_shuffle_onsets(&closed, 1).unwrap();
        assert_eq!(g.units.last(), Some(&12));
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = GrooveSpec {
            jitter_sigma_ms: 5.0,
            lrc_beta: 1.0,
            amplitude_noise: 0.1,
            ghost_probability: 0.2,
            bars: 8,
            ..GrooveSpec::default()
        };
        let a = gen_shuffle_onsets(&spec, 42).unwrap();
        let b = gen_shuffle_onsets(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_shuffle_onsets(&spec, 43).unwrap();
        assert_ne!(a.onsets, c.onsets);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let cases = [
            GrooveSpec { bpm: 0.0, ..GrooveSpec::default() },
            GrooveSpec { swing_ratio: -1.0, ..GrooveSpec::default() },
            GrooveSpec { bars: 0, ..GrooveSpec::default() },
            GrooveSpec { jitter_sigma_ms: -1.0, ..GrooveSpec::default() },
            GrooveSpec { amplitude_pattern: vec![], ..GrooveSpec::default() },
        ];
        for spec in cases {
            assert!(gen_shuffle_onsets(&spec, 0).is_err());
        }
    }

    #[test]
    fn constant_profile_matches_plain_tempo() {
        let plain = GrooveSpec { bars: 4, ..GrooveSpec::default() };
        let profiled = GrooveSpec {
            drift_profile: Some(vec![
                TempoPoint { time_s: 0.0, bpm: 84.0 },
                TempoPoint { time_s: 100.0, bpm: 84.0 },
            ]),
            ..plain.clone()
        };
        let a = gen_shuffle_onsets(&plain, 0).unwrap().onsets.times();
        let b = gen_shuffle_onsets(&profiled, 0).unwrap().onsets.times();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_solver_inverts_phase() {
        let (b0, slope) = (84.0, 0.05);
        let dt = 3.7;
        let phase = TempoMap::groups_per_s(b0) * dt + TempoMap::groups_per_s(slope) * dt * dt / 2.0;
        assert!((solve_segment(b0, slope, phase) - dt).abs() < 1e-12);
    }

    #[test]
    fn powerlaw_noise_is_standardized() {
        let x = gen_powerlaw_noise(1.0, 1000, 3).unwrap();
        let m = x.iter().sum::<f64>() / 1000.0;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 1000.0;
        assert!(m.abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
        assert!(gen_powerlaw_noise(3.5, 10, 0).is_err());
    }

    #[test]
    fn empty_render_is_silent() {
        let clip = render_clicks(&OnsetSeries::default(), 44100.0, &ClickParams::default()).unwrap();
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn crossover_pattern_only() {
        let x = gen_crossover_series(48, &[1.0, -1.0], 1.0, 0.0, 0).unwrap();
        assert_eq!(x[0], 1.0);
        assert_eq!(x[1], -1.0);
        assert!(gen_crossover_series(48, &[1.0], 1.0, 0.5, 0).is_err());
        assert!(gen_crossover_series(48, &[1.0, 1.0], 1.0, 0.5, 0).is_err());
    }
}
