//! Two-bar phrase profiles of interval timing and onset dynamics.
//!
//! Onsets are first placed on the triplet-unit grid by accumulating class
//! multiples from a section anchor; a phrase template then names the grid
//! units (modulo the phrase length) that carry a hi-hat stroke.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{GrooveError, Result};
use crate::metric::{IntervalSeries, SectionMap, SectionTag};
use crate::onset::OnsetSeries;

/// Hi-hat strokes per two-bar phrase in the shuffle.
pub const DEFAULT_PHRASE_POSITIONS: usize = 16;

/// Grid units (eighth-note-triplet steps) of the template positions within
/// one phrase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhraseTemplate {
    pub units_per_phrase: u32,
    pub positions: Vec<u32>,
}

impl PhraseTemplate {
    pub fn new(units_per_phrase: u32, positions: Vec<u32>) -> Result<Self> {
        if positions.first() != Some(&0) {
            return Err(GrooveError::Parameter("template must start at unit 0".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GrooveError::Parameter("template positions must increase".into()));
        }
        if *positions.last().unwrap() >= units_per_phrase {
            return Err(GrooveError::Parameter(
                "template positions must lie inside the phrase".into(),
            ));
        }
        Ok(Self {
            units_per_phrase,
            positions,
        })
    }

    /// Shuffle template: hi-hat on the first and third note of every
    /// triplet, `n_positions / 2` triplets per phrase.
    pub fn shuffle(n_positions: usize) -> Result<Self> {
        if n_positions < 2 || n_positions % 2 != 0 {
            return Err(GrooveError::Parameter(format!(
                "shuffle phrase needs an even number of positions, got {n_positions}"
            )));
        }
        let groups = (n_positions / 2) as u32;
        let positions = (0..groups).flat_map(|g| [3 * g, 3 * g + 2]).collect();
        Self::new(3 * groups, positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Units from position `p` to the next one, wrapping at phrase end.
    pub fn step(&self, p: usize) -> u32 {
        let next = self
            .positions
            .get(p + 1)
            .copied()
            .unwrap_or(self.units_per_phrase);
        next - self.positions[p]
    }

    fn index_of(&self, unit_in_phrase: u32) -> Option<usize> {
        self.positions.binary_search(&unit_in_phrase).ok()
    }
}

/// Position of an onset on the grid of its section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridPosition {
    pub section: usize,
    pub unit: u64,
}

/// Place onsets on the unit grid. Within each section the first onset at
/// or after the section start is unit 0, and each interval advances the
/// count by its class multiple (discarded intervals by their rounded ratio).
/// Without a section map the whole series is one section. Pre-chorus
/// sections are straight-feel and left unaligned.
pub fn align_to_grid(
    onsets: &OnsetSeries,
    classified: &IntervalSeries,
    base_s: f64,
    sections: Option<&SectionMap>,
) -> Result<Vec<Option<GridPosition>>> {
    if classified.len() + 1 != onsets.len() {
        return Err(GrooveError::Parameter(format!(
            "{} intervals do not belong to {} onsets",
            classified.len(),
            onsets.len()
        )));
    }
    let steps: Vec<u64> = classified
        .intervals
        .iter()
        .map(|iv| match iv.multiple() {
            Some(m) => m as u64,
            None => ((iv.tau_s / base_s).round() as u64).max(1),
        })
        .collect();

    let section_of = |t: f64| -> Option<usize> {
        match sections {
            None => Some(0),
            Some(map) => map
                .sections
                .iter()
                .position(|s| t >= s.start_time_s && t < s.end_time_s)
                .filter(|&i| map.sections[i].tag != SectionTag::PreChorus),
        }
    };

    let mut out = vec![None; onsets.len()];
    let mut current: Option<GridPosition> = None;
    for (i, onset) in onsets.onsets.iter().enumerate() {
        let section = section_of(onset.time_s);
        current = match (section, current) {
            (None, _) => None,
            (Some(s), Some(prev)) if prev.section == s => Some(GridPosition {
                section: s,
                unit: prev.unit + steps[i - 1],
            }),
            (Some(s), _) => Some(GridPosition { section: s, unit: 0 }),
        };
        out[i] = current;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Interval,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionStats {
    pub position: usize,
    pub unit: u32,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Relative deviation of the per-unit mean from the phrase ⟨τ⟩, in
    /// percent. Interval profiles only.
    pub deviation_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhraseProfile {
    pub kind: ProfileKind,
    pub template_length: usize,
    pub positions: Vec<PositionStats>,
    /// Phrases with every template onset present (interval profiles).
    pub complete_phrases: usize,
    /// Mean triplet unit inside the complete phrases (interval profiles).
    pub phrase_unit_s: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Onset times keyed by (section, unit).
fn grid_times(onsets: &OnsetSeries, grid: &[Option<GridPosition>]) -> BTreeMap<(usize, u64), usize> {
    onsets
        .onsets
        .iter()
        .zip(grid)
        .enumerate()
        .filter_map(|(i, (_, g))| g.map(|g| ((g.section, g.unit), i)))
        .collect()
}

/// Mean and spread of each template interval over the phrases in which
/// every template onset, and the next phrase's downbeat, is present.
pub fn phrase_interval_profile(
    onsets: &OnsetSeries,
    grid: &[Option<GridPosition>],
    template: &PhraseTemplate,
) -> Result<PhraseProfile> {
    if grid.len() != onsets.len() {
        return Err(GrooveError::Parameter("grid and onsets differ in length".into()));
    }
    let by_unit = grid_times(onsets, grid);
    let units = template.units_per_phrase as u64;

    let mut phrases: BTreeMap<(usize, u64), ()> = BTreeMap::new();
    for &(section, unit) in by_unit.keys() {
        phrases.insert((section, unit / units), ());
    }

    let mut per_position: Vec<Vec<f64>> = vec![Vec::new(); template.len()];
    let mut phrase_units = Vec::new();
    for &(section, phrase) in phrases.keys() {
        let origin = phrase * units;
        let mut times = Vec::with_capacity(template.len() + 1);
        for unit in template
            .positions
            .iter()
            .map(|&p| origin + p as u64)
            .chain(std::iter::once(origin + units))
        {
            match by_unit.get(&(section, unit)) {
                Some(&i) => times.push(onsets.onsets[i].time_s),
                None => break,
            }
        }
        if times.len() != template.len() + 1 {
            continue;
        }
        for (p, w) in times.windows(2).enumerate() {
            per_position[p].push(w[1] - w[0]);
        }
        phrase_units.push((times[template.len()] - times[0]) / units as f64);
    }

    let complete = phrase_units.len();
    let phrase_unit = (complete > 0).then(|| phrase_units.iter().sum::<f64>() / complete as f64);
    let positions = per_position
        .iter()
        .enumerate()
        .map(|(p, values)| {
            let (mean, std) = mean_std(values);
            let deviation_pct = phrase_unit.map(|u| 100.0 * (mean / template.step(p) as f64 - u) / u);
            PositionStats {
                position: p,
                unit: template.positions[p],
                mean,
                std,
                n: values.len(),
                deviation_pct,
            }
        })
        .collect();
    Ok(PhraseProfile {
        kind: ProfileKind::Interval,
        template_length: template.len(),
        positions,
        complete_phrases: complete,
        phrase_unit_s: phrase_unit,
    })
}

/// Mean and spread of onset amplitude at each template position, over
/// every aligned onset (phrases may be incomplete).
pub fn phrase_amplitude_profile(
    onsets: &OnsetSeries,
    grid: &[Option<GridPosition>],
    template: &PhraseTemplate,
) -> Result<PhraseProfile> {
    if grid.len() != onsets.len() {
        return Err(GrooveError::Parameter("grid and onsets differ in length".into()));
    }
    let units = template.units_per_phrase as u64;
    let mut per_position: Vec<Vec<f64>> = vec![Vec::new(); template.len()];
    for (onset, g) in onsets.onsets.iter().zip(grid) {
        if let Some(p) = g.and_then(|g| template.index_of((g.unit % units) as u32)) {
            per_position[p].push(onset.amplitude);
        }
    }
    let positions = per_position
        .iter()
        .enumerate()
        .map(|(p, values)| {
            let (mean, std) = mean_std(values);
            PositionStats {
                position: p,
                unit: template.positions[p],
                mean,
                std,
                n: values.len(),
                deviation_pct: None,
            }
        })
        .collect();
    Ok(PhraseProfile {
        kind: ProfileKind::Amplitude,
        template_length: template.len(),
        positions,
        complete_phrases: 0,
        phrase_unit_s: None,
    })
}
