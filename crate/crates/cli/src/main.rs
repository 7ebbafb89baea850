//! `groovescope` command line: detect onsets, analyze grooves, synthesize
//! test material and compute tempograms.
//!
//! Exit codes: 0 success, 1 degenerate analysis (too few onsets, nothing to
//! fit), 2 usage or input error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use groovescope::dfa::DfaParams;
use groovescope::metric::{BeatClass, DEFAULT_MAX_MULTIPLE};
use groovescope::onset::apply_edits;
use groovescope::phrase::DEFAULT_PHRASE_POSITIONS;
use groovescope::report::{analyze_onsets, detect_from_clip, AnalysisParams, DetectionSettings, InputDescriptor};
use groovescope::signal::{envelope, highpass, load_audio, write_wav};
use groovescope::synth::{
    gen_powerlaw_noise, gen_shuffle_onsets, render_clicks, ClickParams, GrooveSpec, TempoPoint,
    GROUPS_PER_BAR, GROUPS_PER_BEAT,
};
use groovescope::tempogram::{fourier_tempogram, novelty_curve, NoveltyParams, TempogramParams};
use groovescope::{io as gio, DriftMode, GrooveError, OnsetSeries};

#[derive(Parser)]
#[command(name = "groovescope", version, about = "Drum groove microtiming analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect onsets in an audio file and write an annotation CSV.
    Onsets(OnsetsArgs),
    /// Run the full analysis on audio or an annotation CSV.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic groove, a click render or a power-law series.
    Synth(SynthArgs),
    /// Fourier tempogram of an audio file.
    Tempogram(TempogramArgs),
}

#[derive(Args, Clone)]
struct DetectionArgs {
    /// High-pass cutoff before the envelope.
    #[arg(long, default_value_t = 1000.0)]
    cutoff_hz: f64,
    /// Envelope smoothing time constant.
    #[arg(long, default_value_t = 2.0)]
    smoothing_ms: f64,
    /// Peak threshold as a fraction of the envelope maximum.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    #[arg(long, default_value_t = 50.0)]
    refractory_ms: f64,
    /// Detections closer than this collapse onto the first one.
    #[arg(long, default_value_t = 3.0)]
    merge_ms: f64,
    /// Drop peaks whose timing uncertainty exceeds this.
    #[arg(long, default_value_t = 5.0)]
    max_uncertainty_ms: f64,
}

impl DetectionArgs {
    fn settings(&self) -> DetectionSettings {
        DetectionSettings {
            cutoff_hz: self.cutoff_hz,
            smoothing_ms: self.smoothing_ms,
            threshold: self.threshold,
            refractory_ms: self.refractory_ms,
            merge_ms: self.merge_ms,
            max_uncertainty_ms: self.max_uncertainty_ms,
        }
    }
}

#[derive(Args)]
struct OnsetsArgs {
    audio: PathBuf,
    /// Annotation CSV to write; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Manual corrections applied after detection.
    #[arg(long)]
    edits: Option<PathBuf>,
    #[command(flatten)]
    detection: DetectionArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriftModeArg {
    Normalized,
    Grid,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Audio file, or an annotation CSV (`.csv`) which skips detection.
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Section map CSV (start_s,end_s,tag).
    #[arg(long)]
    sections: Option<PathBuf>,
    /// Manual corrections applied before analysis.
    #[arg(long)]
    edits: Option<PathBuf>,
    /// Tempo used to seed the triplet-unit estimate.
    #[arg(long)]
    bpm_hint: Option<f64>,
    /// Intervals longer than this many triplet units are discarded.
    #[arg(long, default_value_t = DEFAULT_MAX_MULTIPLE)]
    max_multiple: f64,
    /// Onsets per two-bar phrase template.
    #[arg(long, default_value_t = DEFAULT_PHRASE_POSITIONS)]
    phrase_len: usize,
    /// Scale range of the short-range exponent, as MIN:MAX.
    #[arg(long, default_value = "4:16", value_parser = parse_range)]
    dfa_short: (usize, usize),
    /// Scale range of the long-range exponent, as MIN:MAX.
    #[arg(long, default_value = "16:100", value_parser = parse_range)]
    dfa_long: (usize, usize),
    #[arg(long, value_enum, default_value = "normalized")]
    drift_mode: DriftModeArg,
    /// Interval DFA on raw durations instead of class-normalized ones.
    #[arg(long)]
    raw_intervals: bool,
    #[command(flatten)]
    detection: DetectionArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON groove spec; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    bpm: Option<f64>,
    /// Long/short ratio inside each triplet.
    #[arg(long)]
    swing: Option<f64>,
    #[arg(long)]
    bars: Option<usize>,
    /// Timing noise standard deviation in ms.
    #[arg(long)]
    jitter: Option<f64>,
    /// Spectral exponent of the timing noise (or of the series with
    /// --series-only).
    #[arg(long)]
    beta: Option<f64>,
    /// Relative amplitude noise.
    #[arg(long)]
    amp_noise: Option<f64>,
    #[arg(long)]
    ghost_prob: Option<f64>,
    /// Ramp the tempo linearly from --bpm to this value over the groove.
    #[arg(long)]
    ramp_to: Option<f64>,
    /// Time of the first stroke in seconds.
    #[arg(long)]
    start: Option<f64>,
    /// Add the downbeat after the last bar.
    #[arg(long)]
    closing_downbeat: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (annotations, or index,value with --series-only); stdout
    /// when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also render the groove as a click track WAV.
    #[arg(long)]
    render: Option<PathBuf>,
    #[arg(long, default_value_t = 44100)]
    sample_rate: u32,
    /// Broadband noise in the render, in dB relative to the loudest click.
    #[arg(long, allow_hyphen_values = true)]
    noise_db: Option<f64>,
    /// Write a power-law noise series instead of a groove.
    #[arg(long)]
    series_only: bool,
    /// Series length for --series-only.
    #[arg(short = 'n', long, default_value_t = 8192)]
    length: usize,
}

#[derive(Args)]
struct TempogramArgs {
    audio: PathBuf,
    /// Long-form CSV (time_s,bpm,magnitude); stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Tempogram window in novelty frames.
    #[arg(long, default_value_t = 1024)]
    window: usize,
    /// Tempogram hop in novelty frames.
    #[arg(long, default_value_t = 64)]
    hop: usize,
    /// Centre of the tempo preference used to pick the per-frame argmax.
    #[arg(long, default_value_t = 84.0)]
    ref_bpm: f64,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected MIN:MAX, got '{s}'"))?;
    let lo: usize = a.trim().parse().map_err(|_| format!("bad range start '{a}'"))?;
    let hi: usize = b.trim().parse().map_err(|_| format!("bad range end '{b}'"))?;
    if lo >= hi {
        return Err(format!("range start {lo} must be below end {hi}"));
    }
    Ok((lo, hi))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<GrooveError> for Failure {
    fn from(e: GrooveError) -> Self {
        let code = match e {
            GrooveError::EmptyInput(_)
            | GrooveError::Length(_)
            | GrooveError::Estimation { .. }
            | GrooveError::UndefinedRatio(_)
            | GrooveError::Fit(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Onsets(a) => cmd_onsets(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Tempogram(a) => cmd_tempogram(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("groovescope: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Write through `write_to` into a buffer, then to `path` atomically or to
/// stdout.
fn emit(path: Option<&Path>, write_to: impl FnOnce(&mut Vec<u8>) -> groovescope::Result<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    write_to(&mut buf)?;
    match path {
        Some(p) => Ok(gio::write_atomic(p, &buf)?),
        None => io::stdout()
            .lock()
            .write_all(&buf)
            .map_err(|e| usage(format!("cannot write to stdout: {e}"))),
    }
}

fn is_annotation_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Detected onsets with edits applied; amplitudes of added onsets come from
/// the same envelope the detector used.
fn onsets_from_audio(
    clip: &groovescope::AudioClip,
    detection: &DetectionSettings,
    edits: Option<&Path>,
) -> CliResult<OnsetSeries> {
    let detected = detect_from_clip(clip, detection)?;
    match edits {
        None => Ok(detected),
        Some(p) => {
            let env = envelope(&highpass(clip, detection.cutoff_hz)?, detection.smoothing_ms)?;
            Ok(apply_edits(&detected, &gio::read_edits(p)?, Some(&env))?)
        }
    }
}

fn cmd_onsets(args: OnsetsArgs) -> CliResult<()> {
    let clip = load_audio(&args.audio)?;
    let onsets = onsets_from_audio(&clip, &args.detection.settings(), args.edits.as_deref())?;
    emit(args.output.as_deref(), |buf| gio::write_annotations_to(buf, &onsets))?;
    if args.output.is_some() {
        eprintln!("{} onsets", onsets.len());
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> CliResult<()> {
    let detection = args.detection.settings();
    let (onsets, input, detection) = if is_annotation_csv(&args.input) {
        let raw = gio::read_annotations(&args.input)?;
        let onsets = match &args.edits {
            Some(p) => apply_edits(&raw, &gio::read_edits(p)?, None)?,
            None => raw,
        };
        let input = InputDescriptor {
            path: args.input.display().to_string(),
            kind: "annotations".into(),
            sample_rate: None,
            duration_s: None,
        };
        (onsets, input, None)
    } else {
        let clip = load_audio(&args.input)?;
        let onsets = onsets_from_audio(&clip, &detection, args.edits.as_deref())?;
        let input = InputDescriptor {
            path: args.input.display().to_string(),
            kind: "audio".into(),
            sample_rate: Some(clip.sample_rate),
            duration_s: Some(clip.duration_s()),
        };
        (onsets, input, Some(detection))
    };
    let sections = args.sections.as_ref().map(gio::read_sections).transpose()?;

    let params = AnalysisParams {
        max_multiple: args.max_multiple,
        bpm_hint: args.bpm_hint,
        drift_mode: match args.drift_mode {
            DriftModeArg::Normalized => DriftMode::Normalized,
            DriftModeArg::Grid => DriftMode::Grid,
        },
        phrase_positions: args.phrase_len,
        dfa: DfaParams {
            short_range: args.dfa_short,
            long_range: args.dfa_long,
            ..DfaParams::default()
        },
        dfa_raw_intervals: args.raw_intervals,
        ..AnalysisParams::default()
    };
    let analysis = analyze_onsets(&onsets, sections.as_ref(), &params, input, detection)?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    gio::write_annotations(dir.join("onsets.csv"), &analysis.onsets)?;
    gio::write_intervals(dir.join("intervals.csv"), &analysis.intervals)?;
    gio::write_drift(dir.join("drift.csv"), &analysis.drift)?;
    for (name, (_, result)) in &analysis.dfa {
        if let Some(r) = result {
            gio::write_dfa(dir.join(format!("dfa_{name}.csv")), r)?;
        }
    }
    let phrase = &analysis.report.phrase;
    gio::write_profile(dir.join("phrase_interval.csv"), &phrase.interval)?;
    gio::write_profile(dir.join("phrase_amplitude.csv"), &phrase.amplitude)?;
    for klass in BeatClass::VALID {
        if let Some(s) = analysis.stats.get(klass) {
            gio::write_histogram(dir.join(format!("histogram_{klass}.csv")), &s.histogram)?;
        }
    }
    gio::write_json(dir.join("report.json"), &analysis.report)?;

    let r = &analysis.report;
    let c = r.interval_counts;
    let swing = r
        .swing
        .as_ref()
        .map_or_else(|| "undefined".to_string(), |s| format!("{:.3}", s.swing_ratio));
    let dfa = &r.dfa["intervals"];
    let fmt = |a: Option<f64>| a.map_or_else(|| "-".to_string(), |a| format!("{a:.3}"));
    println!(
        "onsets {}  singles/doubles/triples {}/{}/{}  discarded {}  swing {swing}  alpha1 {}  alpha2 {}",
        r.onset_count,
        c.single,
        c.double,
        c.triple,
        c.discarded,
        fmt(dfa.alpha1),
        fmt(dfa.alpha2)
    );
    Ok(())
}

fn groove_spec(args: &SynthArgs) -> CliResult<GrooveSpec> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("bad spec {}: {e}", p.display())))?
        }
        None => GrooveSpec::default(),
    };
    macro_rules! set {
        ($field:ident, $flag:expr) => {
            if let Some(v) = $flag {
                spec.$field = v;
            }
        };
    }
    set!(bpm, args.bpm);
    set!(swing_ratio, args.swing);
    set!(bars, args.bars);
    set!(jitter_sigma_ms, args.jitter);
    set!(lrc_beta, args.beta);
    set!(amplitude_noise, args.amp_noise);
    set!(ghost_probability, args.ghost_prob);
    set!(start_time_s, args.start);
    spec.closing_downbeat |= args.closing_downbeat;
    if let Some(end_bpm) = args.ramp_to {
        // the ramp spans the whole groove at the mean tempo
        let groups = (spec.bars * GROUPS_PER_BAR) as f64;
        let duration = groups * 60.0 / (GROUPS_PER_BEAT * 0.5 * (spec.bpm + end_bpm));
        spec.drift_profile = Some(vec![
            TempoPoint { time_s: 0.0, bpm: spec.bpm },
            TempoPoint { time_s: duration, bpm: end_bpm },
        ]);
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    if args.series_only {
        let series = gen_powerlaw_noise(args.beta.unwrap_or(0.0), args.length, args.seed).map_err(as_usage)?;
        return emit(args.output.as_deref(), |buf| gio::write_series_to(buf, &series));
    }
    let spec = groove_spec(&args)?;
    let groove = gen_shuffle_onsets(&spec, args.seed).map_err(as_usage)?;
    emit(args.output.as_deref(), |buf| gio::write_annotations_to(buf, &groove.onsets))?;
    if let Some(path) = &args.render {
        let params = ClickParams {
            noise_db: args.noise_db,
            seed: args.seed,
            ..ClickParams::default()
        };
        let clip = render_clicks(&groove.onsets, args.sample_rate as f64, &params).map_err(as_usage)?;
        write_wav(&clip, path)?;
    }
    Ok(())
}

/// Generator failures come from bad flags, whatever their variant.
fn as_usage(e: GrooveError) -> Failure {
    usage(e.to_string())
}

fn cmd_tempogram(args: TempogramArgs) -> CliResult<()> {
    let clip = load_audio(&args.audio)?;
    let novelty = novelty_curve(&clip, &NoveltyParams::default())?;
    let params = TempogramParams {
        window_length: args.window,
        hop: args.hop,
        ref_bpm: args.ref_bpm,
        ..TempogramParams::default()
    };
    let tg = fourier_tempogram(&novelty, &params)?;
    emit(args.output.as_deref(), |buf| gio::write_tempogram_to(buf, &tg))?;
    let mut track: Vec<f64> = tg.argmax_bpm().into_iter().flatten().collect();
    if !track.is_empty() {
        track.sort_by(f64::total_cmp);
        eprintln!(
            "{} frames, argmax tempo {:.1} to {:.1} bpm, median {:.1}",
            track.len(),
            track[0],
            track[track.len() - 1],
            track[track.len() / 2]
        );
    }
    Ok(())
}
