//! CSV and JSON artifacts of an experiment run.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{ExperimentResult, LabeledDistribution, ObservableSeries};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Shortest decimal that parses back to the same `f64`.
/// Negative zero is written as `0`.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

pub fn series_csv(series: &ObservableSeries) -> String {
    let mut out = series.columns.join(",");
    out.push('\n');
    for row in &series.rows {
        let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn distribution_csv(d: &LabeledDistribution) -> String {
    let mut out = String::from("grid,density\n");
    for (x, p) in d.distribution.grid.iter().zip(&d.distribution.density) {
        let _ = writeln!(out, "{},{}", num(*x), num(*p));
    }
    out
}

pub fn series_file_name(label: &str) -> String {
    format!("series_{label}.csv")
}

/// `dist_<target>_<tau>.csv`, prefixed by the label when a run has several.
pub fn distribution_file_name(d: &LabeledDistribution, multiple_labels: bool) -> String {
    let base = format!("dist_{}_{}.csv", d.distribution.target.name(), num(d.tau));
    if multiple_labels {
        format!("{}_{base}", d.label)
    } else {
        base
    }
}

/// Writes every series, distribution and `metadata.json` into `dir`,
/// creating it if needed, and returns the written paths.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), OutputError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
        Ok(())
    };
    for s in &result.series {
        put(series_file_name(&s.label), series_csv(s))?;
    }
    let multiple = result.series.len() > 1;
    for d in &result.distributions {
        put(distribution_file_name(d, multiple), distribution_csv(d))?;
    }
    let meta = serde_json::to_string_pretty(&result.metadata).expect("metadata serializes");
    put("metadata.json".into(), meta + "\n")?;
    Ok(written)
}
