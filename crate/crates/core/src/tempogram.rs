//! Spectral-flux novelty curve and Fourier tempogram.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{GrooveError, Result};
use crate::signal::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoveltyParams {
    /// STFT frame length in samples (Hann window).
    pub frame_length: usize,
    /// STFT hop in samples; sets the novelty sample rate.
    pub hop: usize,
    /// Constant C in log(1 + C·|X|).
    pub compression: f64,
    /// Spectral magnitudes below this level relative to the peak are floored.
    pub min_db: f64,
}

impl Default for NoveltyParams {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            hop: 512,
            compression: 1000.0,
            min_db: -74.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Novelty {
    pub values: Vec<f64>,
    /// Frames per second.
    pub rate: f64,
}

impl Novelty {
    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.rate
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Log-compressed spectral flux. Frame `k` is centred on sample `k * hop`
/// (zero-padded at the edges); novelty at frame `k` is the half-wave
/// rectified increase of the compressed spectrum from frame `k − 1`,
/// summed over bins.
pub fn novelty_curve(clip: &AudioClip, params: &NoveltyParams) -> Result<Novelty> {
    if params.frame_length < 2 || params.hop == 0 {
        return Err(GrooveError::Parameter("frame length and hop must be positive".into()));
    }
    if clip.samples.is_empty() {
        return Err(GrooveError::EmptyInput("clip has no samples".into()));
    }
    let n = clip.samples.len();
    let frames = n.div_ceil(params.hop);
    let len = params.frame_length;
    let bins = len / 2 + 1;
    let window = hann(len);
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    let mut spec = Vec::with_capacity(frames * bins);

    for k in 0..frames {
        let centre = (k * params.hop) as isize;
        for (i, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            let idx = centre - (len / 2) as isize + i as isize;
            let s = if idx >= 0 && (idx as usize) < n {
                clip.samples[idx as usize]
            } else {
                0.0
            };
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        spec.extend(buf[..bins].iter().map(|c| c.norm()));
    }

    let peak = spec.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(Novelty {
            values: vec![0.0; frames],
            rate: clip.sample_rate / params.hop as f64,
        });
    }
    let floor = 10f64.powf(params.min_db / 20.0);
    let c = params.compression.abs();
    for m in spec.iter_mut() {
        *m = (1.0 + c * (*m / peak).max(floor)).ln();
    }

    let mut values = vec![0.0; frames];
    for k in 1..frames {
        let cur = &spec[k * bins..(k + 1) * bins];
        let prev = &spec[(k - 1) * bins..k * bins];
        values[k] = cur.iter().zip(prev).map(|(a, b)| (a - b).max(0.0)).sum();
    }
    Ok(Novelty {
        values,
        rate: clip.sample_rate / params.hop as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TempogramParams {
    /// Novelty frames per analysis window.
    pub window_length: usize,
    /// Novelty frames between analysis windows.
    pub hop: usize,
    pub fft_length: usize,
    pub min_bpm: f64,
    pub max_bpm: f64,
    /// Centre of the tempo preference used for the argmax track and the
    /// anchor of cyclic folding.
    pub ref_bpm: f64,
    /// Width, in octaves, of the log-Gaussian tempo preference.
    pub ref_octaves: f64,
    /// Tempo classes per octave in the cyclic tempogram.
    pub octave_divider: usize,
}

impl Default for TempogramParams {
    fn default() -> Self {
        Self {
            window_length: 1024,
            hop: 64,
            fft_length: 4096,
            min_bpm: 30.0,
            max_bpm: 360.0,
            ref_bpm: 84.0,
            ref_octaves: 1.0,
            octave_divider: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tempogram {
    /// Centre time of each analysis window.
    pub times_s: Vec<f64>,
    pub tempi_bpm: Vec<f64>,
    /// `magnitude[frame][tempo]`, non-negative.
    pub magnitude: Vec<Vec<f64>>,
    pub params: TempogramParams,
}

impl Tempogram {
    /// Preference weight of a tempo: log-Gaussian around `ref_bpm`.
    pub fn tempo_weight(&self, bpm: f64) -> f64 {
        let octaves = (bpm / self.params.ref_bpm).log2() / self.params.ref_octaves;
        (-0.5 * octaves * octaves).exp()
    }

    /// Index of the strongest weighted tempo in every frame; `None` for
    /// frames with no energy.
    pub fn argmax_track(&self) -> Vec<Option<usize>> {
        let weights: Vec<f64> = self.tempi_bpm.iter().map(|&b| self.tempo_weight(b)).collect();
        self.magnitude
            .iter()
            .map(|col| {
                col.iter()
                    .zip(&weights)
                    .enumerate()
                    .map(|(i, (m, w))| (i, m * w))
                    .filter(|&(_, v)| v > 0.0)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
            })
            .collect()
    }

    pub fn argmax_bpm(&self) -> Vec<Option<f64>> {
        self.argmax_track()
            .into_iter()
            .map(|i| i.map(|i| self.tempi_bpm[i]))
            .collect()
    }

    /// Spacing of the tempo axis.
    pub fn bin_width_bpm(&self) -> f64 {
        match self.tempi_bpm.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }
}

/// Hann-windowed Fourier magnitude of the novelty curve, evaluated at the
/// zero-padded FFT bins whose tempo lies in `[min_bpm, max_bpm]`.
pub fn fourier_tempogram(novelty: &Novelty, params: &TempogramParams) -> Result<Tempogram> {
    if !(params.min_bpm > 0.0 && params.min_bpm < params.max_bpm) {
        return Err(GrooveError::Parameter(format!(
            "tempo range [{}, {}] is invalid",
            params.min_bpm, params.max_bpm
        )));
    }
    if params.window_length == 0 || params.hop == 0 || params.fft_length < params.window_length {
        return Err(GrooveError::Parameter(
            "window and hop must be positive and the fft no shorter than the window".into(),
        ));
    }
    if novelty.values.len() < params.window_length {
        return Err(GrooveError::Length(format!(
            "novelty has {} frames, window needs {}",
            novelty.values.len(),
            params.window_length
        )));
    }

    let bpm_per_bin = novelty.rate * 60.0 / params.fft_length as f64;
    let bins: Vec<usize> = (1..=params.fft_length / 2)
        .filter(|&k| {
            let bpm = k as f64 * bpm_per_bin;
            bpm >= params.min_bpm && bpm <= params.max_bpm
        })
        .collect();
    let tempi_bpm: Vec<f64> = bins.iter().map(|&k| k as f64 * bpm_per_bin).collect();

    let window = hann(params.window_length);
    let norm = window.iter().sum::<f64>();
    let fft = FftPlanner::new().plan_fft_forward(params.fft_length);
    let frames = (novelty.values.len() - params.window_length) / params.hop + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); params.fft_length];
    let mut magnitude = Vec::with_capacity(frames);
    let mut times_s = Vec::with_capacity(frames);

    for f in 0..frames {
        let start = f * params.hop;
        let seg = &novelty.values[start..start + params.window_length];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        magnitude.push(bins.iter().map(|&k| buf[k].norm() / norm).collect());
        times_s.push((start as f64 + params.window_length as f64 / 2.0) / novelty.rate);
    }

    Ok(Tempogram {
        times_s,
        tempi_bpm,
        magnitude,
        params: *params,
    })
}

/// Tempogram folded onto one octave: class `j` sums the magnitude at
/// `ref_bpm · 2^(k + j / octave_divider)` over every octave `k` inside the
/// tempo range, interpolating linearly along the tempo axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclicTempogram {
    pub times_s: Vec<f64>,
    /// Tempo of each class relative to the reference, in [1, 2).
    pub relative_tempo: Vec<f64>,
    pub magnitude: Vec<Vec<f64>>,
}

pub fn cyclic_tempogram(tempogram: &Tempogram) -> Result<CyclicTempogram> {
    let p = &tempogram.params;
    if p.octave_divider == 0 {
        return Err(GrooveError::Parameter("octave divider must be positive".into()));
    }
    let tempi = &tempogram.tempi_bpm;
    if tempi.len() < 2 {
        return Err(GrooveError::Length("tempo axis has fewer than two bins".into()));
    }
    let relative_tempo: Vec<f64> = (0..p.octave_divider)
        .map(|j| 2f64.powf(j as f64 / p.octave_divider as f64))
        .collect();
    let (lo, hi) = (tempi[0], tempi[tempi.len() - 1]);
    let k_min = (lo / p.ref_bpm).log2().floor() as i32 - 1;
    let k_max = (hi / p.ref_bpm).log2().ceil() as i32 + 1;

    let interp = |col: &[f64], bpm: f64| -> Option<f64> {
        if bpm < lo || bpm > hi {
            return None;
        }
        let i = tempi.partition_point(|&t| t <= bpm).clamp(1, tempi.len() - 1);
        let (t0, t1) = (tempi[i - 1], tempi[i]);
        let w = (bpm - t0) / (t1 - t0);
        Some(col[i - 1] * (1.0 - w) + col[i] * w)
    };

    let magnitude = tempogram
        .magnitude
        .iter()
        .map(|col| {
            relative_tempo
                .iter()
                .map(|r| {
                    (k_min..=k_max)
                        .filter_map(|k| interp(col, p.ref_bpm * r * 2f64.powi(k)))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(CyclicTempogram {
        times_s: tempogram.times_s.clone(),
        relative_tempo,
        magnitude,
    })
}
