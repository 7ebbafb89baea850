//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

/// DFA with explicit loops: integrate, cut windows from the start and from
/// the end, fit a straight line per window through the normal equations,
/// average the residual variance. Shares no code with the library.
pub fn naive_dfa1(x: &[f64], s: usize) -> f64 {
    let n = x.len();
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n as f64;
    let mut y = vec![0.0; n + 1];
    for k in 0..n {
        y[k + 1] = y[k] + (x[k] - mean);
    }

    let fit_residual = |w: &[f64]| -> f64 {
        let m = w.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (i, v) in w.iter().enumerate() {
            let t = i as f64;
            sx += t;
            sy += v;
            sxx += t * t;
            sxy += t * v;
        }
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let icpt = (sy - slope * sx) / m;
        let mut r = 0.0;
        for (i, v) in w.iter().enumerate() {
            let e = v - (icpt + slope * i as f64);
            r += e * e;
        }
        r / m
    };

    let windows = y.len() / s;
    let mut total = 0.0;
    for k in 0..windows {
        total += fit_residual(&y[k * s..(k + 1) * s]);
    }
    for k in 0..windows {
        let hi = y.len() - k * s;
        total += fit_residual(&y[hi - s..hi]);
    }
    (total / (2 * windows) as f64).sqrt()
}

/// Time since the first stroke at which `groups` triplet groups have
/// elapsed, for tempo rising linearly from `b0` to `b1` bpm over `ramp_s`
/// seconds (two groups per beat). Closed-form root of the phase integral.
pub fn ramp_time(groups: f64, b0: f64, b1: f64, ramp_s: f64) -> f64 {
    let k = (b1 - b0) / ramp_s;
    // phase(t) = (2/60)(b0 t + k t²/2)
    let a = k / 60.0;
    let b = 2.0 * b0 / 60.0;
    let ramp_phase = a * ramp_s * ramp_s + b * ramp_s;
    if groups <= ramp_phase {
        (-b + (b * b + 4.0 * a * groups).sqrt()) / (2.0 * a)
    } else {
        ramp_s + (groups - ramp_phase) / (2.0 * b1 / 60.0)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Analytic magnitude of an order-`order` Butterworth high-pass designed by
/// the bilinear transform with prewarping.
pub fn butterworth_hp_gain(f: f64, fc: f64, fs: f64, order: i32) -> f64 {
    let ratio = (std::f64::consts::PI * fc / fs).tan() / (std::f64::consts::PI * f / fs).tan();
    1.0 / (1.0 + ratio.powi(2 * order)).sqrt()
}

pub fn sine(freq: f64, fs: f64, seconds: f64) -> Vec<f64> {
    let n = (fs * seconds) as usize;
    (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
        .collect()
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}
