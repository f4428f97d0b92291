//! Residual a posteriori indicators and fraction marking.

mod indicators;
mod marking;

pub use indicators::{compute_indicators, CellIndicators, EstimatorOptions, JumpSplit};
pub use marking::{mark_fraction, marking_csv, MarkSets, MarkingRecord};
