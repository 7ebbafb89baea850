mod common;

use common::{mean, ramp_time};
use groovescope::metric::{
    classify_intervals, estimate_base_unit, interval_stats, intervals, BeatClass,
    DEFAULT_HISTOGRAM_BIN_S,
};
use groovescope::phrase::{
    align_to_grid, phrase_amplitude_profile, phrase_interval_profile, PhraseTemplate,
};
use groovescope::rhythm::{compute_drift, swing_ratio, DriftMode};
use groovescope::synth::{gen_shuffle_onsets, GrooveSpec, TempoPoint};
use groovescope::{Onset, OnsetSeries};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn classified(onsets: &OnsetSeries) -> (groovescope::IntervalSeries, f64) {
    let raw = intervals(onsets).unwrap();
    let base = estimate_base_unit(&raw, None, 3.5).unwrap();
    (classify_intervals(&raw, base, 3.5).unwrap(), base)
}

/// Random 1:2:3 grid with timing jitter on every onset.
fn jittered_grid(unit: f64, n: usize, sigma: f64, seed: u64) -> (Vec<f64>, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(1e-12)).unwrap();
    let mults: Vec<u32> = (0..n).map(|_| rng.random_range(1..=3)).collect();
    let mut t = 1.0;
    let mut times = vec![t + normal.sample(&mut rng)];
    for &m in &mults {
        t += m as f64 * unit;
        times.push(t + normal.sample(&mut rng));
    }
    (times, mults)
}

#[test]
fn jittered_grid_recovers_base_unit() {
    for seed in 0..10 {
        let (times, _) = jittered_grid(0.122, 600, 0.008, seed);
        let (_, base) = classified(&OnsetSeries::from_times(&times).unwrap());
        assert!((base - 0.122).abs() < 0.002, "seed {seed}: {base}");
    }
}

#[test]
fn gaussian_singles_statistics() {
    // mean within 1 ms and std within 1.5 ms of (128, 8) ms, and |skew| < 0.3
    let mut passes = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.128, 0.008).unwrap();
        let mut t = 0.0;
        let mut times = vec![t];
        for _ in 0..450 {
            t += normal.sample(&mut rng);
            times.push(t);
        }
        let (iv, _) = classified(&OnsetSeries::from_times(&times).unwrap());
        let stats = interval_stats(&iv, DEFAULT_HISTOGRAM_BIN_S);
        assert_eq!(stats.single.count, 450);
        let m = stats.single.mean_s.unwrap();
        let s = stats.single.std_s.unwrap();
        let taus = iv.class_taus(BeatClass::Single);
        let mu = mean(&taus);
        let m2 = taus.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / taus.len() as f64;
        let m3 = taus.iter().map(|x| (x - mu).powi(3)).sum::<f64>() / taus.len() as f64;
        let skew = m3 / m2.powf(1.5);
        if (m - 0.128).abs() < 0.001 && (s - 0.008).abs() < 0.0015 && skew.abs() < 0.3 {
            passes += 1;
        }
        assert_eq!(stats.single.histogram.counts.iter().sum::<usize>(), 450);
    }
    assert!(passes >= 18, "{passes}/20 seeds within tolerance");
}

#[test]
fn onsets_to_intervals_example() {
    let iv = intervals(&OnsetSeries::from_times(&[0.0, 0.128, 0.356]).unwrap()).unwrap();
    let taus = iv.taus();
    assert!((taus[0] - 0.128).abs() < 1e-12 && (taus[1] - 0.228).abs() < 1e-12);
}

/// Drift of a metronome-free ramp 84 → 86 bpm, against the closed-form
/// onset times of the ramp.
#[test]
fn tempo_ramp_drift_matches_closed_form() {
    let ramp_s = 84.0;
    let spec = GrooveSpec {
        bars: 60,
        drift_profile: Some(vec![
            TempoPoint { time_s: 0.0, bpm: 84.0 },
            TempoPoint { time_s: ramp_s, bpm: 86.0 },
        ]),
        start_time_s: 0.0,
        ..GrooveSpec::default()
    };
    let g = gen_shuffle_onsets(&spec, 0).unwrap();
    let (iv, base) = classified(&g.onsets);
    let exact: Vec<f64> = g
        .units
        .iter()
        .map(|&u| ramp_time(u as f64 / 3.0, 84.0, 86.0, ramp_s))
        .collect();

    let grid = compute_drift(&iv, base, DriftMode::Grid).unwrap();
    let normalized = compute_drift(&iv, base, DriftMode::Normalized).unwrap();
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for (i, (pg, pn)) in grid.points.iter().zip(&normalized.points).enumerate() {
        let steps = (g.units[i + 1] - g.units[i]) as f64;
        let closed_grid = exact[i + 1] - exact[0] - g.units[i + 1] as f64 * base;
        acc += (exact[i + 1] - exact[i]) / steps - base;
        worst = worst.max((pg.d_s - closed_grid).abs()).max((pn.d_s - acc).abs());
    }
    assert!(worst < 0.001, "max deviation {worst}");
    // the ramp produces a visible drift, not a trivially flat line
    assert!(grid.summary().max_abs_s > 0.05);
}

#[test]
fn swing_ratio_recovered_from_jittered_shuffle() {
    let spec = GrooveSpec {
        swing_ratio: 1.79,
        jitter_sigma_ms: 5.0,
        ..GrooveSpec::default()
    };
    let mut recovered = Vec::new();
    for seed in 0..20 {
        let g = gen_shuffle_onsets(&spec, seed).unwrap();
        let (iv, _) = classified(&g.onsets);
        recovered.push(swing_ratio(&iv).unwrap().swing_ratio);
    }
    assert!(recovered.iter().all(|r| (r - 1.79).abs() <= 0.03), "{recovered:?}");
}

/// Timing noise sits on onset times, so intervals carry its first
/// difference: spectral exponent β − 2 and DFA exponent (β − 1) / 2.
#[test]
fn interval_exponent_of_phase_noise() {
    for beta in [2.0, 2.5] {
        let spec = GrooveSpec {
            jitter_sigma_ms: 10.0,
            lrc_beta: beta,
            ..GrooveSpec::default()
        };
        let alphas: Vec<f64> = (0..20)
            .map(|seed| {
                let g = gen_shuffle_onsets(&spec, seed).unwrap();
                let (iv, _) = classified(&g.onsets);
                let r = groovescope::dfa::analyze(&iv.valid_normalized(), &Default::default()).unwrap();
                r.alpha2.unwrap().alpha
            })
            .collect();
        let m = mean(&alphas);
        assert!((m - (beta - 1.0) / 2.0).abs() < 0.1, "beta {beta}: {m}");
    }
}

#[test]
fn shortened_doubles_profile() {
    // doubles 5% short of two units, singles absorb the rest of the triplet
    let spec = GrooveSpec {
        swing_ratio: 1.9 / 1.1,
        bars: 8,
        start_time_s: 0.0,
        closing_downbeat: true,
        ..GrooveSpec::default()
    };
    let g = gen_shuffle_onsets(&spec, 0).unwrap();
    let (iv, base) = classified(&g.onsets);
    let template = PhraseTemplate::shuffle(16).unwrap();
    let grid = align_to_grid(&g.onsets, &iv, base, None).unwrap();
    let p = phrase_interval_profile(&g.onsets, &grid, &template).unwrap();
    assert_eq!(p.complete_phrases, 4);
    for pos in &p.positions {
        let dev = pos.deviation_pct.unwrap();
        let expect = if pos.position % 2 == 0 { -5.0 } else { 10.0 };
        assert!((dev - expect).abs() < 1e-6, "position {}: {dev}", pos.position);
    }
    assert_eq!(p.positions.iter().map(|s| s.n).sum::<usize>(), 4 * 16);
}

#[test]
fn alternating_amplitudes_profile() {
    let spec = GrooveSpec {
        amplitude_pattern: vec![0.6, 0.3],
        amplitude_noise: 0.05,
        bars: 60,
        ..GrooveSpec::default()
    };
    let g = gen_shuffle_onsets(&spec, 4).unwrap();
    let (iv, base) = classified(&g.onsets);
    let grid = align_to_grid(&g.onsets, &iv, base, None).unwrap();
    let p = phrase_amplitude_profile(&g.onsets, &grid, &PhraseTemplate::shuffle(16).unwrap()).unwrap();
    for w in p.positions.chunks(2) {
        let ratio = w[0].mean / w[1].mean;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }
}

#[test]
fn incomplete_last_phrase_is_not_counted() {
    let spec = GrooveSpec {
        bars: 4,
        ..GrooveSpec::default()
    };
    // without the closing downbeat the second phrase never completes
    let g = gen_shuffle_onsets(&spec, 0).unwrap();
    let (iv, base) = classified(&g.onsets);
    let grid = align_to_grid(&g.onsets, &iv, base, None).unwrap();
    let p = phrase_interval_profile(&g.onsets, &grid, &PhraseTemplate::shuffle(16).unwrap()).unwrap();
    assert_eq!(p.complete_phrases, 1);
    assert!(p.positions.iter().all(|s| s.n == 1));
}

/// Shuffles with a swing ratio high enough that the long note reads as a
/// double without a tempo hint.
fn shuffle_times() -> impl Strategy<Value = Vec<f64>> {
    (0.09f64..0.16, 1.75f64..2.4, 20usize..120, any::<u64>()).prop_map(|(unit, swing, groups, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let late = 3.0 * unit * swing / (swing + 1.0);
        let mut times = Vec::new();
        for g in 0..groups {
            let t0 = 1.0 + 3.0 * unit * g as f64;
            times.push(t0 + rng.random_range(-0.004..0.004));
            times.push(t0 + late + rng.random_range(-0.004..0.004));
        }
        times
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drift_ignores_time_offset(times in shuffle_times(), offset in -0.5f64..100.0) {
        let a = OnsetSeries::from_times(&times).unwrap();
        let shifted: Vec<f64> = times.iter().map(|t| t + offset + 1.0).collect();
        let b = OnsetSeries::from_times(&shifted).unwrap();
        let (ia, base) = classified(&a);
        let (ib, _) = classified(&b);
        for mode in [DriftMode::Normalized, DriftMode::Grid] {
            let da = compute_drift(&ia, base, mode).unwrap();
            let db = compute_drift(&ib, base, mode).unwrap();
            for (p, q) in da.points.iter().zip(&db.points) {
                prop_assert!((p.d_s - q.d_s).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn drift_increments_and_telescoping(times in shuffle_times()) {
        let s = OnsetSeries::from_times(&times).unwrap();
        let (iv, base) = classified(&s);
        let norm = compute_drift(&iv, base, DriftMode::Normalized).unwrap();
        let mut prev = 0.0;
        for (p, interval) in norm.points.iter().zip(&iv.intervals) {
            if p.gap {
                prop_assert_eq!(p.d_s, 0.0);
            } else {
                let expect = interval.normalized_tau_s.unwrap() - base;
                prop_assert!((p.d_s - prev - expect).abs() < 1e-9);
            }
            prev = p.d_s;
        }
        let grid = compute_drift(&iv, base, DriftMode::Grid).unwrap();
        for span in grid.spans() {
            let first = &iv.intervals[span.start];
            let last = &iv.intervals[span.end - 1];
            let elapsed = last.end_time_s() - first.start_time_s;
            let steps: u32 = iv.intervals[span.clone()].iter().map(|i| i.multiple().unwrap()).sum();
            let d = grid.points[span.end - 1].d_s;
            prop_assert!((d - (elapsed - steps as f64 * base)).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_times_scales_base_and_keeps_classes(times in shuffle_times(), c in 0.5f64..2.0) {
        let a = OnsetSeries::from_times(&times).unwrap();
        let b = OnsetSeries::from_times(&times.iter().map(|t| t * c).collect::<Vec<_>>()).unwrap();
        let (ia, base_a) = classified(&a);
        let (ib, base_b) = classified(&b);
        prop_assert!((base_b - c * base_a).abs() < 1e-9);
        for (x, y) in ia.intervals.iter().zip(&ib.intervals) {
            prop_assert_eq!(x.klass, y.klass);
        }
        let sa = interval_stats(&ia, 0.002);
        let sb = interval_stats(&ib, 0.002);
        for k in BeatClass::VALID {
            if let (Some(ma), Some(mb)) = (sa.get(k).unwrap().mean_s, sb.get(k).unwrap().mean_s) {
                prop_assert!((mb - c * ma).abs() < 1e-9);
            }
        }
        let ra = swing_ratio(&ia).unwrap().swing_ratio;
        let rb = swing_ratio(&ib).unwrap().swing_ratio;
        prop_assert!((ra - rb).abs() < 1e-9);
    }

    #[test]
    fn class_bands_partition(r in 0.0001f64..6.0) {
        let k = BeatClass::from_ratio(r, 3.5);
        let expect = if r < 1.5 {
            BeatClass::Single
        } else if r < 2.5 {
            BeatClass::Double
        } else if r <= 3.5 {
            BeatClass::Triple
        } else {
            BeatClass::Discarded
        };
        prop_assert_eq!(k, expect);
    }

    #[test]
    fn interval_profile_counts(times in shuffle_times(), drop in proptest::collection::vec(0usize..240, 0..6)) {
        let onsets: Vec<Onset> = times
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, &t)| Onset::new(t, 0.5))
            .collect();
        prop_assume!(onsets.len() >= 8);
        let s = OnsetSeries::new(onsets).unwrap();
        let (iv, base) = classified(&s);
        let grid = align_to_grid(&s, &iv, base, None).unwrap();
        let template = PhraseTemplate::shuffle(16).unwrap();
        let p = phrase_interval_profile(&s, &grid, &template).unwrap();
        let total: usize = p.positions.iter().map(|x| x.n).sum();
        prop_assert_eq!(total, p.complete_phrases * template.len());
        prop_assert!(p.positions.iter().all(|x| x.n <= p.complete_phrases));
    }
}
