//! Drum-groove microtiming analysis.
//!
//! The pipeline runs audio → high-pass → envelope → onsets → intervals →
//! classes against the triplet grid, and from there to swing ratio, tempo
//! drift, two-bar phrase profiles and DFA scaling exponents. The [`synth`]
//! module generates grooves, correlated noise and click audio with known
//! ground truth for every stage.

pub mod dfa;
pub mod error;
mod filter;
pub mod io;
pub mod metric;
pub mod onset;
pub mod phrase;
pub mod report;
pub mod rhythm;
pub mod signal;
pub mod synth;
pub mod tempogram;

pub use error::{GrooveError, Result};
pub use metric::{BeatClass, IntervalSeries, SectionMap};
pub use onset::{AnnotationEdit, Label, Onset, OnsetSeries, Source};
pub use rhythm::{DriftMode, DriftSeries, SwingReport};
pub use signal::{AudioClip, EnvelopeSignal};
