//! Serializable report pieces and output helpers.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use dirms::geometry::{unit_to_angle, unit_to_lonlat};
use dirms::meanshift::MsConfig;
use dirms::UnitVector;

use crate::args::MinFilter;
use crate::ingest::{DroppedRow, InputDataset};

/// Dropped rows listed individually in reports; the total is always given.
const MAX_LISTED_DROPS: usize = 100;

#[derive(Debug, Serialize)]
pub struct InputSummary {
    pub path: String,
    pub format: String,
    pub rows_read: usize,
    pub points: usize,
    pub dropped: usize,
    pub filtered: usize,
    pub renormalized: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_filter: Option<MinFilter>,
    pub dropped_rows: Vec<DroppedRow>,
}

impl InputSummary {
    pub fn new(d: &InputDataset, min_filter: Option<&MinFilter>) -> Self {
        Self {
            path: d.path.display().to_string(),
            format: d.format.to_string(),
            rows_read: d.rows_read,
            points: d.points.len(),
            dropped: d.dropped.len(),
            filtered: d.filtered,
            renormalized: d.renormalized,
            min_filter: min_filter.cloned(),
            dropped_rows: d.dropped.iter().take(MAX_LISTED_DROPS).cloned().collect(),
        }
    }

    /// One-line summary for the terminal.
    pub fn describe(&self) -> String {
        format!(
            "read {} rows from {}: {} points, {} dropped, {} filtered",
            self.rows_read, self.path, self.points, self.dropped, self.filtered
        )
    }
}

#[derive(Debug, Serialize)]
pub struct SolverEcho {
    pub tol: f64,
    pub max_iter: usize,
    pub merge_tol: f64,
    pub blurring: bool,
}

impl SolverEcho {
    pub fn new(cfg: &MsConfig, blurring: bool) -> Self {
        Self {
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            merge_tol: cfg.merge_tol,
            blurring,
        }
    }
}

/// A point reported as lon/lat on the 2-sphere, as an angle on the circle,
/// and always in Cartesian coordinates.
#[derive(Debug, Serialize)]
pub struct Location {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub coords: Vec<f64>,
}

impl Location {
    pub fn of(x: &UnitVector) -> Self {
        let (lon, lat) = unit_to_lonlat(x).map_or((None, None), |(a, b)| (Some(a), Some(b)));
        Self {
            lon,
            lat,
            theta: unit_to_angle(x).ok(),
            coords: x.as_slice().to_vec(),
        }
    }
}

pub fn threads() -> usize {
    rayon::current_num_threads()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// CSV header names for a point in the given dimension, matching the
/// ingestion formats: `theta`, `lon,lat`, or `x0..xq`.
pub fn point_columns(dim: usize) -> Vec<String> {
    match dim {
        2 => vec!["theta".into()],
        3 => vec!["lon".into(), "lat".into()],
        _ => (0..dim).map(|i| format!("x{i}")).collect(),
    }
}

pub fn point_fields(x: &UnitVector) -> Vec<String> {
    match x.dim() {
        2 => vec![unit_to_angle(x).expect("circle point").to_string()],
        3 => {
            let (lon, lat) = unit_to_lonlat(x).expect("sphere point");
            vec![lon.to_string(), lat.to_string()]
        }
        _ => x.as_slice().iter().map(f64::to_string).collect(),
    }
}

pub fn label_field(l: Option<usize>) -> String {
    l.map_or_else(String::new, |l| l.to_string())
}
