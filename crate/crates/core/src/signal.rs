//! Audio loading, the 1 kHz high-pass pre-filter and the amplitude envelope
//! that onset detection runs on.

use std::path::Path;

use crate::error::{GrooveError, Result};
use crate::filter::{butterworth_highpass, filtfilt, one_pole_zero_phase};

/// Butterworth order used by [`highpass`].
pub const HIGHPASS_ORDER: usize = 4;
/// Default high-pass cutoff applied to drum stems before onset detection.
pub const DEFAULT_CUTOFF_HZ: f64 = 1000.0;
/// Default envelope smoothing time constant.
pub const DEFAULT_SMOOTHING_MS: f64 = 2.0;

const MIN_SAMPLE_RATE: u32 = 8000;

/// Mono audio, full scale = 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Channel count of the source before downmixing.
    pub channel_count_original: u16,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(GrooveError::Parameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(GrooveError::Parameter(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            channel_count_original: 1,
        })
    }

    pub fn silent(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Smoothed, peak-normalized amplitude envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSignal {
    pub values: Vec<f64>,
    pub sample_rate: f64,
    /// Peak of the envelope before normalization, in input units.
    pub source_max: f64,
    /// Set when the input contained no energy; values are then all zero.
    pub silent: bool,
}

impl EnvelopeSignal {
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    /// Envelope value at `time_s` (nearest sample), if inside the signal.
    pub fn value_at(&self, time_s: f64) -> Option<f64> {
        if time_s < 0.0 {
            return None;
        }
        let idx = (time_s * self.sample_rate).round() as usize;
        self.values.get(idx).copied()
    }
}

/// Load a WAV file (16/24-bit integer or 32-bit float PCM, one or two
/// channels) and downmix it to mono by averaging channels.
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => GrooveError::io(path, io),
        other => GrooveError::Format(other.to_string()),
    })?;
    let spec = reader.spec();

    if !(1..=2).contains(&spec.channels) {
        return Err(GrooveError::Format(format!(
            "{} channels (only mono or stereo supported)",
            spec.channels
        )));
    }
    if spec.sample_rate < MIN_SAMPLE_RATE {
        return Err(GrooveError::Format(format!(
            "sample rate {} Hz is below {MIN_SAMPLE_RATE} Hz",
            spec.sample_rate
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1u32 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| GrooveError::Format(e.to_string()))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| GrooveError::Format(e.to_string()))?,
        (fmt, bits) => {
            let kind = match fmt {
                hound::SampleFormat::Int => "integer",
                hound::SampleFormat::Float => "float",
            };
            return Err(GrooveError::Format(format!("{bits}-bit {kind} PCM")));
        }
    };

    let channels = spec.channels as usize;
    let samples: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().sum::<f64>() / channels as f64).clamp(-1.0, 1.0))
        .collect();

    let mut clip = AudioClip::new(samples, spec.sample_rate as f64)?;
    clip.channel_count_original = spec.channels;
    Ok(clip)
}

/// Write a mono clip as 32-bit float WAV.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let map_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => GrooveError::io(path, io),
        other => GrooveError::Format(other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_err)?;
    for &s in &clip.samples {
        writer.write_sample(s as f32).map_err(map_err)?;
    }
    writer.finalize().map_err(map_err)
}

/// Zero-phase 4th-order Butterworth high-pass.
pub fn highpass(clip: &AudioClip, cutoff_hz: f64) -> Result<AudioClip> {
    let sections = butterworth_highpass(HIGHPASS_ORDER, cutoff_hz, clip.sample_rate)?;
    // a few periods of the cutoff is enough for the edge padding to settle
    let pad = (3.0 * clip.sample_rate / cutoff_hz).ceil() as usize;
    Ok(AudioClip {
        samples: filtfilt(&sections, &clip.samples, pad),
        sample_rate: clip.sample_rate,
        channel_count_original: clip.channel_count_original,
    })
}

/// Full-wave rectification followed by a first-order low-pass with time
/// constant `smoothing_ms`, run forward and backward so peaks stay where
/// the energy is. Normalized to a peak of 1 unless the input is silent.
pub fn envelope(clip: &AudioClip, smoothing_ms: f64) -> Result<EnvelopeSignal> {
    if !(smoothing_ms > 0.0) {
        return Err(GrooveError::Parameter(format!(
            "smoothing must be positive, got {smoothing_ms} ms"
        )));
    }
    let rectified: Vec<f64> = clip.samples.iter().map(|s| s.abs()).collect();
    let mut values = one_pole_zero_phase(&rectified, smoothing_ms / 1000.0, clip.sample_rate);
    // the smoother is a convex combination, so tiny negatives are rounding
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    let source_max = values.iter().copied().fold(0.0, f64::max);
    let silent = source_max <= 0.0;
    if !silent {
        for v in values.iter_mut() {
            *v /= source_max;
        }
    }
    Ok(EnvelopeSignal {
        values,
        sample_rate: clip.sample_rate,
        source_max,
        silent,
    })
}
