//! Detrended fluctuation analysis.
//!
//! The series is mean-centred and integrated into a profile that starts at
//! the origin (so it has `n + 1` points). For every scale `s` the profile is
//! cut into non-overlapping windows, an order-`n` polynomial is removed from
//! each window, and F(s) is the square root of the mean residual variance.
//! By default windows are tiled from both ends of the profile so no sample
//! is dropped; this also makes F invariant under reversing the input.

use serde::Serialize;

use crate::error::{GrooveError, Result};

pub const SHORT_RANGE: (usize, usize) = (4, 16);
pub const LONG_RANGE: (usize, usize) = (16, 100);
pub const MIN_SCALE: usize = 4;
const SCALES_PER_DECADE: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tiling {
    /// Windows from the start and from the end, variances pooled.
    #[default]
    BothEnds,
    /// Windows from the start only; a short tail is dropped.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub s_min: usize,
    pub s_max: usize,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalAlpha {
    pub s: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationResult {
    pub scales: Vec<usize>,
    #[serde(rename = "F")]
    pub fluctuation: Vec<f64>,
    pub detrend_order: usize,
    pub tiling: Tiling,
    /// Set for constant input, where F is identically zero.
    pub degenerate: bool,
    pub alpha1: Option<AlphaFit>,
    pub alpha2: Option<AlphaFit>,
    /// Fit over every scale.
    pub alpha_global: Option<AlphaFit>,
    pub alpha_local: Vec<LocalAlpha>,
}

/// Geometrically spaced integer scales from 4 to `n / 4`, about sixteen
/// per decade before deduplication.
pub fn default_scales(n: usize) -> Vec<usize> {
    let max = n / 4;
    let mut scales: Vec<usize> = Vec::new();
    let mut k = 0.0;
    loop {
        let s = (MIN_SCALE as f64 * 10f64.powf(k / SCALES_PER_DECADE)).round() as usize;
        if s > max {
            break;
        }
        if scales.last() != Some(&s) {
            scales.push(s);
        }
        k += 1.0;
    }
    scales
}

/// Orthonormal polynomial basis (degree 0..=order) sampled at 0..len.
fn poly_basis(len: usize, order: usize) -> Vec<Vec<f64>> {
    let half = (len as f64 - 1.0) / 2.0;
    let scale = if half > 0.0 { half } else { 1.0 };
    let x: Vec<f64> = (0..len).map(|i| (i as f64 - half) / scale).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for degree in 0..=order {
        let mut v: Vec<f64> = x.iter().map(|xi| xi.powi(degree as i32)).collect();
        // two rounds of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    basis
}

fn residual_variance(window: &[f64], basis: &[Vec<f64>], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(window);
    for q in basis {
        let dot: f64 = scratch.iter().zip(q).map(|(a, b)| a * b).sum();
        scratch.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
    }
    scratch.iter().map(|r| r * r).sum::<f64>() / window.len() as f64
}

/// Mean-centred cumulative sum with a leading zero.
pub fn profile(series: &[f64]) -> Vec<f64> {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(series.iter().map(|x| {
            acc += x - mean;
            acc
        }))
        .collect()
}

/// F(s) at each requested scale. Fitted exponents are left empty; see
/// [`analyze`] for the full result.
pub fn dfa_fluctuation(
    series: &[f64],
    scales: &[usize],
    detrend_order: usize,
    tiling: Tiling,
) -> Result<FluctuationResult> {
    if scales.is_empty() {
        return Err(GrooveError::Parameter("no scales given".into()));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GrooveError::Parameter("scales must be strictly increasing".into()));
    }
    let min_scale = detrend_order + 2;
    if scales[0] < min_scale.max(MIN_SCALE) {
        return Err(GrooveError::Parameter(format!(
            "smallest scale {} is below {}",
            scales[0],
            min_scale.max(MIN_SCALE)
        )));
    }
    let max_scale = *scales.last().unwrap();
    if series.len() < 4 * max_scale {
        return Err(GrooveError::Length(format!(
            "{} samples cannot support scale {max_scale} (need {})",
            series.len(),
            4 * max_scale
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(GrooveError::Parameter("series contains non-finite values".into()));
    }

    let degenerate = series.iter().all(|&x| x == series[0]);
    let fluctuation = if degenerate {
        vec![0.0; scales.len()]
    } else {
        let prof = profile(series);
        let mut scratch = Vec::new();
        scales
            .iter()
            .map(|&s| {
                let basis = poly_basis(s, detrend_order);
                let windows = prof.len() / s;
                let mut total = 0.0;
                let mut count = 0usize;
                for k in 0..windows {
                    total += residual_variance(&prof[k * s..(k + 1) * s], &basis, &mut scratch);
                    count += 1;
                }
                if tiling == Tiling::BothEnds {
                    let end = prof.len();
                    for k in 0..windows {
                        let hi = end - k * s;
                        total += residual_variance(&prof[hi - s..hi], &basis, &mut scratch);
                        count += 1;
                    }
                }
                (total / count as f64).sqrt()
            })
            .collect()
    };

    Ok(FluctuationResult {
        scales: scales.to_vec(),
        fluctuation,
        detrend_order,
        tiling,
        degenerate,
        alpha1: None,
        alpha2: None,
        alpha_global: None,
        alpha_local: Vec::new(),
    })
}

/// Ordinary least squares of `ys` on `xs`: (slope, intercept, r²).
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Slope of log F against log s over the scales in `[s_min, s_max]`.
pub fn fit_alpha(result: &FluctuationResult, s_min: usize, s_max: usize) -> Result<AlphaFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = result
        .scales
        .iter()
        .zip(&result.fluctuation)
        .filter(|(&s, _)| s >= s_min && s <= s_max)
        .map(|(&s, &f)| {
            if f > 0.0 {
                Ok(((s as f64).ln(), f.ln()))
            } else {
                Err(GrooveError::Fit(format!("F({s}) is not positive")))
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    if xs.len() < 3 {
        return Err(GrooveError::Fit(format!(
            "only {} scales inside [{s_min}, {s_max}]",
            xs.len()
        )));
    }
    let (alpha, intercept, r_squared) = ols(&xs, &ys);
    let inside: Vec<usize> = result
        .scales
        .iter()
        .copied()
        .filter(|&s| s >= s_min && s <= s_max)
        .collect();
    Ok(AlphaFit {
        alpha,
        intercept,
        r_squared,
        s_min: inside[0],
        s_max: *inside.last().unwrap(),
        n_points: xs.len(),
    })
}

/// Scale-resolved exponent: log-log slope over `2 * half_window + 1`
/// consecutive scale points centred on each interior scale.
pub fn local_alpha(result: &FluctuationResult, half_window: usize) -> Result<Vec<LocalAlpha>> {
    let width = 2 * half_window + 1;
    let n = result.scales.len();
    if half_window == 0 || n < width {
        return Err(GrooveError::Fit(format!(
            "{n} scales are too few for a local window of {width}"
        )));
    }
    if result.fluctuation.iter().any(|&f| !(f > 0.0)) {
        return Err(GrooveError::Fit("fluctuation function is not positive".into()));
    }
    let xs: Vec<f64> = result.scales.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = result.fluctuation.iter().map(|f| f.ln()).collect();
    Ok((half_window..n - half_window)
        .map(|c| {
            let (slope, _, _) = ols(&xs[c - half_window..=c + half_window], &ys[c - half_window..=c + half_window]);
            LocalAlpha {
                s: result.scales[c],
                alpha: slope,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DfaParams {
    pub short_range: (usize, usize),
    pub long_range: (usize, usize),
    pub detrend_order: usize,
    pub tiling: Tiling,
    pub half_window: usize,
}

impl Default for DfaParams {
    fn default() -> Self {
        Self {
            short_range: SHORT_RANGE,
            long_range: LONG_RANGE,
            detrend_order: 1,
            tiling: Tiling::BothEnds,
            half_window: 2,
        }
    }
}

/// F(s) over the default scale grid plus α₁, α₂, the global fit and α(s).
/// Exponents whose range holds fewer than three scales are left empty.
pub fn analyze(series: &[f64], params: &DfaParams) -> Result<FluctuationResult> {
    let scales = default_scales(series.len());
    if scales.is_empty() {
        return Err(GrooveError::Length(format!(
            "{} samples are too few for DFA (need {})",
            series.len(),
            4 * MIN_SCALE
        )));
    }
    let mut result = dfa_fluctuation(series, &scales, params.detrend_order, params.tiling)?;
    if result.degenerate {
        return Ok(result);
    }
    let (a, b) = params.short_range;
    result.alpha1 = fit_alpha(&result, a, b).ok();
    let (a, b) = params.long_range;
    result.alpha2 = fit_alpha(&result, a, b).ok();
    result.alpha_global = fit_alpha(&result, 0, usize::MAX).ok();
    result.alpha_local = local_alpha(&result, params.half_window).unwrap_or_default();
    Ok(result)
}
