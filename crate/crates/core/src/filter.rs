//! Butterworth high-pass design and zero-phase (forward-backward) filtering.
//!
//! Sections are realized in transposed direct form II. Filtering pads both
//! ends with an odd reflection of the signal and starts every section in its
//! steady state for the first padded sample, so edges do not ring.

use std::f64::consts::PI;

use crate::error::{GrooveError, Result};

/// One second-order section, `a[0]` normalized to 1. First-order sections
/// keep `b[2] = a[2] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Gain at DC (z = 1).
    fn dc_gain(&self) -> f64 {
        let num = self.b[0] + self.b[1] + self.b[2];
        let den = self.a[0] + self.a[1] + self.a[2];
        num / den
    }

    /// DF2T state that makes a constant input `x0` produce a constant output.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y0 = self.dc_gain() * x0;
        let s2 = self.b[2] * x0 - self.a[2] * y0;
        let s1 = y0 - self.b[0] * x0;
        [s1, s2]
    }

    fn run(&self, data: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for x in data.iter_mut() {
            let input = *x;
            let y = b0 * input + state[0];
            state[0] = b1 * input - a1 * y + state[1];
            state[1] = b2 * input - a2 * y;
            *x = y;
        }
    }
}

/// Digital Butterworth high-pass of the given order via the bilinear
/// transform, prewarped so the -3 dB point lands exactly on `cutoff_hz`.
pub fn butterworth_highpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Vec<Biquad>> {
    if order == 0 {
        return Err(GrooveError::Parameter("filter order must be >= 1".into()));
    }
    if !(sample_rate > 0.0) {
        return Err(GrooveError::Parameter(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let nyquist = sample_rate / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(GrooveError::Parameter(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }

    let k = (PI * cutoff_hz / sample_rate).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(order.div_ceil(2));

    for i in 0..order / 2 {
        // pole pair angle of the analog prototype
        let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
        let q = 1.0 / (2.0 * theta.cos());
        let norm = 1.0 / (1.0 + k / q + k2);
        sections.push(Biquad {
            b: [norm, -2.0 * norm, norm],
            a: [1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm],
        });
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        sections.push(Biquad {
            b: [norm, -norm, 0.0],
            a: [1.0, (k - 1.0) * norm, 0.0],
        });
    }
    Ok(sections)
}

/// Apply a cascade of sections forward then backward. The output has the
/// same length as the input and no phase shift.
pub fn filtfilt(sections: &[Biquad], input: &[f64], pad_len: usize) -> Vec<f64> {
    let n = input.len();
    if n == 0 || sections.is_empty() {
        return input.to_vec();
    }
    let pad = pad_len.min(n.saturating_sub(1));

    // odd extension: 2*x[0] - x[pad..1], signal, 2*x[n-1] - x[n-2..n-1-pad]
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * input[0] - input[i]));
    ext.extend_from_slice(input);
    ext.extend((1..=pad).map(|i| 2.0 * input[n - 1] - input[n - 1 - i]));

    cascade(sections, &mut ext);
    ext.reverse();
    cascade(sections, &mut ext);
    ext.reverse();

    ext.drain(..pad);
    ext.truncate(n);
    ext
}

fn cascade(sections: &[Biquad], data: &mut [f64]) {
    for section in sections {
        let state = section.steady_state(data[0]);
        section.run(data, state);
    }
}

/// First-order low-pass with time constant `tau_s`, run forward and
/// backward. Each pass starts from the first sample's value.
pub fn one_pole_zero_phase(input: &[f64], tau_s: f64, sample_rate: f64) -> Vec<f64> {
    let mut out = input.to_vec();
    if out.is_empty() {
        return out;
    }
    let coeff = (-1.0 / (tau_s * sample_rate)).exp();
    one_pole_pass(&mut out, coeff);
    out.reverse();
    one_pole_pass(&mut out, coeff);
    out.reverse();
    out
}

fn one_pole_pass(data: &mut [f64], coeff: f64) {
    let mut state = data[0];
    for x in data.iter_mut() {
        state = coeff * state + (1.0 - coeff) * *x;
        *x = state;
    }
}
