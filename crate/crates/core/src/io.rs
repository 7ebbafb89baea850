//! CSV interchange: annotations, edits, sections and plot-ready outputs.
//!
//! Every writer has a `Write`-generic form and a path form; path writers
//! build the file in memory and publish it with a rename, so readers never
//! see a half-written file.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dfa::FluctuationResult;
use crate::error::{GrooveError, Result};
use crate::metric::{Histogram, IntervalSeries, Section, SectionMap, SectionTag};
use crate::onset::{AnnotationEdit, EditKind, Label, Onset, OnsetSeries, Source};
use crate::phrase::PhraseProfile;
use crate::rhythm::DriftSeries;
use crate::tempogram::Tempogram;

/// Write `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| GrooveError::Parameter(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes).map_err(|e| GrooveError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        GrooveError::io(path, e)
    })
}

fn to_file<F>(path: impl AsRef<Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    write_atomic(path, &buf)
}

fn open(path: impl AsRef<Path>) -> Result<fs::File> {
    let path = path.as_ref();
    fs::File::open(path).map_err(|e| GrooveError::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---- annotations ----------------------------------------------------------

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    time_s: f64,
    #[serde(default)]
    amplitude: Option<f64>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

fn parse_or<T: std::str::FromStr<Err = GrooveError>>(v: Option<String>, default: T) -> Result<T> {
    match v.as_deref().map(str::trim) {
        None | Some("") => Ok(default),
        Some(s) => s.parse(),
    }
}

/// Header `index,time_s,amplitude,label,source`; time to 6 decimals,
/// amplitude in shortest round-trip form.
pub fn write_annotations_to<W: Write>(out: W, series: &OnsetSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "time_s", "amplitude", "label", "source"])?;
    for (i, o) in series.onsets.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:.6}", o.time_s),
            o.amplitude.to_string(),
            o.label.to_string(),
            o.source.to_string(),
        ])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

/// Rows may appear in any order; the index column is ignored. Only
/// `time_s` is required: amplitude defaults to 1, label to unknown and
/// source to auto.
pub fn read_annotations_from<R: Read>(input: R) -> Result<OnsetSeries> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut onsets = Vec::new();
    for row in r.deserialize::<AnnotationRow>() {
        let row = row?;
        onsets.push(Onset {
            time_s: row.time_s,
            amplitude: row.amplitude.unwrap_or(1.0),
            label: parse_or(row.label, Label::Unknown)?,
            source: parse_or(row.source, Source::Auto)?,
            uncertainty_ms: 0.0,
        });
    }
    onsets.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    OnsetSeries::new(onsets)
}

pub fn write_annotations(path: impl AsRef<Path>, series: &OnsetSeries) -> Result<()> {
    to_file(path, |buf| write_annotations_to(buf, series))
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<OnsetSeries> {
    read_annotations_from(open(path)?)
}

// ---- edits ----------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct EditRow {
    kind: String,
    target_time_s: f64,
    #[serde(default)]
    new_time_s: Option<f64>,
    #[serde(default)]
    label: Option<String>,
}

/// Header `kind,target_time_s,new_time_s,label`; absent values are empty.
pub fn write_edits_to<W: Write>(out: W, edits: &[AnnotationEdit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "target_time_s", "new_time_s", "label"])?;
    for e in edits {
        w.write_record([
            e.kind.to_string(),
            e.target_time_s.to_string(),
            opt(e.new_time_s),
            e.label.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn read_edits_from<R: Read>(input: R) -> Result<Vec<AnnotationEdit>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut edits = Vec::new();
    for (i, row) in r.deserialize::<EditRow>().enumerate() {
        let row = row?;
        let kind: EditKind = row.kind.parse()?;
        let label = match row.label.as_deref() {
            None | Some("") => None,
            Some(s) => Some(s.parse::<Label>()?),
        };
        if kind == EditKind::Move && row.new_time_s.is_none() {
            return Err(GrooveError::Csv(format!("edit row {i}: move needs new_time_s")));
        }
        if kind == EditKind::Relabel && label.is_none() {
            return Err(GrooveError::Csv(format!("edit row {i}: relabel needs a label")));
        }
        edits.push(AnnotationEdit {
            kind,
            target_time_s: row.target_time_s,
            new_time_s: row.new_time_s,
            label,
        });
    }
    Ok(edits)
}

pub fn write_edits(path: impl AsRef<Path>, edits: &[AnnotationEdit]) -> Result<()> {
    to_file(path, |buf| write_edits_to(buf, edits))
}

pub fn read_edits(path: impl AsRef<Path>) -> Result<Vec<AnnotationEdit>> {
    read_edits_from(open(path)?)
}

// ---- sections -------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct SectionRow {
    start_s: f64,
    end_s: f64,
    tag: String,
}

pub fn write_sections_to<W: Write>(out: W, map: &SectionMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_s", "end_s", "tag"])?;
    for s in &map.sections {
        w.write_record([s.start_time_s.to_string(), s.end_time_s.to_string(), s.tag.to_string()])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn read_sections_from<R: Read>(input: R) -> Result<SectionMap> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut sections = Vec::new();
    for row in r.deserialize::<SectionRow>() {
        let row = row?;
        sections.push(Section {
            start_time_s: row.start_s,
            end_time_s: row.end_s,
            tag: row.tag.parse::<SectionTag>()?,
        });
    }
    SectionMap::new(sections)
}

pub fn read_sections(path: impl AsRef<Path>) -> Result<SectionMap> {
    read_sections_from(open(path)?)
}

pub fn write_sections(path: impl AsRef<Path>, map: &SectionMap) -> Result<()> {
    to_file(path, |buf| write_sections_to(buf, map))
}

// ---- analysis outputs -----------------------------------------------------

/// Header `index,start_time_s,tau_s,class,normalized_tau_s,valid`; class
/// and normalized τ are empty before classification and for discards.
pub fn write_intervals_to<W: Write>(out: W, series: &IntervalSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "start_time_s", "tau_s", "class", "normalized_tau_s", "valid"])?;
    for (i, iv) in series.intervals.iter().enumerate() {
        w.write_record([
            i.to_string(),
            iv.start_time_s.to_string(),
            iv.tau_s.to_string(),
            iv.klass.map(|k| k.to_string()).unwrap_or_default(),
            opt(iv.normalized_tau_s),
            u8::from(iv.valid).to_string(),
        ])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_intervals(path: impl AsRef<Path>, series: &IntervalSeries) -> Result<()> {
    to_file(path, |buf| write_intervals_to(buf, series))
}

/// Header `index,time_s,drift_s,gap` with gap as 0 or 1.
pub fn write_drift_to<W: Write>(out: W, drift: &DriftSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "time_s", "drift_s", "gap"])?;
    for p in &drift.points {
        w.write_record([
            p.index.to_string(),
            p.time_s.to_string(),
            p.d_s.to_string(),
            u8::from(p.gap).to_string(),
        ])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_drift(path: impl AsRef<Path>, drift: &DriftSeries) -> Result<()> {
    to_file(path, |buf| write_drift_to(buf, drift))
}

/// Header `position,mean,std,n,deviation_pct`.
pub fn write_profile_to<W: Write>(out: W, profile: &PhraseProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position", "mean", "std", "n", "deviation_pct"])?;
    for p in &profile.positions {
        w.write_record([
            p.position.to_string(),
            p.mean.to_string(),
            p.std.to_string(),
            p.n.to_string(),
            opt(p.deviation_pct),
        ])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_profile(path: impl AsRef<Path>, profile: &PhraseProfile) -> Result<()> {
    to_file(path, |buf| write_profile_to(buf, profile))
}

/// Header `s,F,alpha_local`; alpha_local is empty at edge scales.
pub fn write_dfa_to<W: Write>(out: W, result: &FluctuationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "F", "alpha_local"])?;
    for (&s, &f) in result.scales.iter().zip(&result.fluctuation) {
        let local = result.alpha_local.iter().find(|l| l.s == s).map(|l| l.alpha);
        w.write_record([s.to_string(), f.to_string(), opt(local)])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_dfa(path: impl AsRef<Path>, result: &FluctuationResult) -> Result<()> {
    to_file(path, |buf| write_dfa_to(buf, result))
}

/// Long form, header `time_s,bpm,magnitude`.
pub fn write_tempogram_to<W: Write>(out: W, tempogram: &Tempogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "bpm", "magnitude"])?;
    for (t, col) in tempogram.times_s.iter().zip(&tempogram.magnitude) {
        for (b, m) in tempogram.tempi_bpm.iter().zip(col) {
            w.write_record([t.to_string(), b.to_string(), m.to_string()])?;
        }
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_tempogram(path: impl AsRef<Path>, tempogram: &Tempogram) -> Result<()> {
    to_file(path, |buf| write_tempogram_to(buf, tempogram))
}

/// Header `bin_start_s,bin_end_s,count`.
pub fn write_histogram_to<W: Write>(out: W, histogram: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_start_s", "bin_end_s", "count"])?;
    for (i, c) in histogram.counts.iter().enumerate() {
        let lo = histogram.start_s + i as f64 * histogram.bin_width_s;
        w.write_record([lo.to_string(), (lo + histogram.bin_width_s).to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_histogram(path: impl AsRef<Path>, histogram: &Histogram) -> Result<()> {
    to_file(path, |buf| write_histogram_to(buf, histogram))
}

/// Header `index,value`.
pub fn write_series_to<W: Write>(out: W, series: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value"])?;
    for (i, v) in series.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| GrooveError::Csv(e.to_string()))
}

pub fn write_series(path: impl AsRef<Path>, series: &[f64]) -> Result<()> {
    to_file(path, |buf| write_series_to(buf, series))
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    value: f64,
}

pub fn read_series_from<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<SeriesRow>()
        .map(|row| Ok(row?.value))
        .collect()
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| GrooveError::Format(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotations_round_trip() {
        let series = OnsetSeries::new(vec![
            Onset::new(0.5, 0.25).with_label(Label::Hihat),
            Onset {
                source: Source::ManualAdd,
                ..Onset::new(0.75, 0.0).with_label(Label::Ghost)
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_annotations_to(&mut buf, &series).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "index,time_s,amplitude,label,source\n0,0.500000,0.25,hihat,auto\n1,0.750000,0,ghost,manual-add\n"
        );
        let back = read_annotations_from(buf.as_slice()).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn empty_annotations_have_header_only() {
        let mut buf = Vec::new();
        write_annotations_to(&mut buf, &OnsetSeries::default()).unwrap();
        assert_eq!(buf, b"index,time_s,amplitude,label,source\n");
        assert!(read_annotations_from(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn hand_written_annotations_are_sorted_and_defaulted() {
        let text = "index,time_s,amplitude\n0,1.0,0.5\n1,0.5,0.4\n";
        let s = read_annotations_from(text.as_bytes()).unwrap();
        assert_eq!(s.times(), vec![0.5, 1.0]);
        assert_eq!(s.onsets[0].label, Label::Unknown);
        assert_eq!(s.onsets[0].source, Source::Auto);
    }

    #[test]
    fn bare_time_column_is_enough() {
        let s = read_annotations_from("time_s\n0.25\n0.5\n".as_bytes()).unwrap();
        assert_eq!(s.times(), vec![0.25, 0.5]);
        assert!(s.onsets.iter().all(|o| o.amplitude == 1.0));
    }

    #[test]
    fn bad_annotation_label_is_error() {
        let text = "index,time_s,amplitude,label,source\n0,1.0,0.5,cowbell,auto\n";
        assert!(read_annotations_from(text.as_bytes()).is_err());
    }

    #[test]
    fn edits_round_trip() {
        let edits = vec![
            AnnotationEdit::add(3.5, Some(Label::Snare)),
            AnnotationEdit::remove(2.0),
            AnnotationEdit::move_to(2.0, 2.004),
            AnnotationEdit::relabel(1.0, Label::Ghost),
        ];
        let mut buf = Vec::new();
        write_edits_to(&mut buf, &edits).unwrap();
        assert_eq!(read_edits_from(buf.as_slice()).unwrap(), edits);
    }

    #[test]
    fn move_without_destination_is_rejected() {
        let text = "kind,target_time_s,new_time_s,label\nmove,1.0,,\n";
        assert!(read_edits_from(text.as_bytes()).is_err());
    }

    #[test]
    fn sections_round_trip() {
        let text = "start_s,end_s,tag\n0,10,A1-verse\n10,20,A2-prechorus\n20,30,B-chorus\n";
        let map = read_sections_from(text.as_bytes()).unwrap();
        assert_eq!(map.sections.len(), 3);
        let mut buf = Vec::new();
        write_sections_to(&mut buf, &map).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn series_round_trip() {
        let v = vec![0.1, -2.5, 1e-300];
        let mut buf = Vec::new();
        write_series_to(&mut buf, &v).unwrap();
        assert_eq!(read_series_from(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn interval_rows_carry_class_and_validity() {
        use crate::metric::{classify_intervals, intervals};
        let s = OnsetSeries::from_times(&[0.0, 0.125, 0.375, 1.0]).unwrap();
        let iv = classify_intervals(&intervals(&s).unwrap(), 0.125, 3.5).unwrap();
        let mut buf = Vec::new();
        write_intervals_to(&mut buf, &iv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "index,start_time_s,tau_s,class,normalized_tau_s,valid");
        assert!(rows[2].starts_with("1,0.125,0.25,double,0.125,1"));
        assert!(rows[3].ends_with("discarded,,0"));
    }
}
