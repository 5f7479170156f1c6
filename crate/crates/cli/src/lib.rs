//! Command-line driver: map generation, batch experiments, the grid oracle,
//! and CSV/SVG export.

pub mod commands;
pub mod export;
pub mod svg;
