//! CSV writers for batch results and grid posteriors.
//!
//! Floats are written with Rust's shortest round-trip formatting, which is
//! locale independent and always uses a dot decimal separator.

use std::io::Write;

use anyhow::Result;
use pfloc_core::{BatchSummary, GridPosterior};

pub const RESULTS_HEADER: [&str; 6] = ["trial_index", "est_x_m", "est_y_m", "error_m", "resample_count", "iterations_run"];

/// One row per successful trial, then `mean`, `min` and `max` rows that carry
/// the statistic in the `error_m` column and leave the others empty.
pub fn write_results<W: Write>(out: W, summary: &BatchSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in &summary.results {
        w.write_record([
            r.trial_index.to_string(),
            r.estimate.x.to_string(),
            r.estimate.y.to_string(),
            r.error_m.to_string(),
            r.resample_count.to_string(),
            r.iterations_run.to_string(),
        ])?;
    }
    for (label, v) in [
        ("mean", summary.mean_error_m),
        ("min", summary.min_error_m),
        ("max", summary.max_error_m),
    ] {
        w.write_record([label, "", "", &v.to_string(), "", ""])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_posterior<W: Write>(out: W, g: &GridPosterior) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_x_m", "cell_y_m", "probability"])?;
    for (c, p) in g.cells() {
        w.write_record([c.x.to_string(), c.y.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
