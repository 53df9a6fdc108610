//! Experiment harness around the point-source recovery library: canned
//! experiments with reproducible seeds, CSV/JSON/SVG outputs, and the
//! layered settings the `superres` binary exposes.

pub mod config;
pub mod experiments;
pub mod heatmap;
pub mod report;
