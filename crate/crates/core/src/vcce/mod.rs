//! Counterfactual clues drawn on ECG reports: decompression into markings and SVG output.

mod markings;
mod render;

pub use markings::{build_markings, prepare_data, ChangeFrequency, Marking, MarkingShape};
pub use render::{render_report, ReportLayout};
