//! CSV ingestion into unit vectors.
//!
//! Rows that cannot be used (parse failures, latitudes outside `[-90, 90]`,
//! zero vectors) are dropped and recorded with their line number.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use dirms::geometry::{angle_to_unit, lonlat_to_unit};
use dirms::{PointSet, UnitVector};

use crate::args::{Format, MinFilter};

/// Cartesian rows whose norm differs from 1 by more than this are counted
/// as renormalized.
const UNIT_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("{path}: missing column `{column}` (header: {header})")]
    MissingColumn {
        path: PathBuf,
        column: String,
        header: String,
    },

    #[error("{path}: no usable rows ({dropped} dropped, {filtered} filtered)")]
    EmptyDataset {
        path: PathBuf,
        dropped: usize,
        filtered: usize,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct InputDataset {
    pub points: PointSet,
    pub format: Format,
    pub path: PathBuf,
    /// Data rows read, excluding the header.
    pub rows_read: usize,
    pub dropped: Vec<DroppedRow>,
    /// Rows removed by the minimum filter.
    pub filtered: usize,
    /// Cartesian rows that were not unit-norm on input.
    pub renormalized: usize,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
            header: headers.iter().collect::<Vec<_>>().join(","),
        })
}

fn field(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, String> {
    let raw = record.get(idx).ok_or_else(|| format!("missing field `{name}`"))?;
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("cannot parse `{raw}` in column `{name}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value in column `{name}`"))
    }
}

/// Wraps longitudes in `(180, 360]` to `(−180, 0]`.
pub fn wrap_longitude(lon: f64) -> f64 {
    if lon > 180.0 {
        lon - 360.0
    } else {
        lon
    }
}

pub fn ingest(path: &Path, format: Format, min_filter: Option<&MinFilter>) -> Result<InputDataset, IngestError> {
    if !path.is_file() {
        return Err(IngestError::FileNotFound(path.to_path_buf()));
    }
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();

    let cols: Vec<(usize, String)> = match format {
        Format::LonlatDeg => ["lon", "lat"]
            .iter()
            .map(|c| Ok((column(&headers, c, path)?, c.to_string())))
            .collect::<Result<_, IngestError>>()?,
        Format::AnglesRad => vec![(column(&headers, "theta", path)?, "theta".into())],
        Format::Cartesian => {
            let mut cols = Vec::new();
            while let Some(i) = headers.iter().position(|h| h == format!("x{}", cols.len())) {
                cols.push((i, format!("x{}", cols.len())));
            }
            if cols.len() < 2 {
                column(&headers, &format!("x{}", cols.len()), path)?;
            }
            cols
        }
    };
    let filter_col = min_filter
        .map(|f| column(&headers, &f.column, path).map(|i| (i, f)))
        .transpose()?;
    let dim = match format {
        Format::LonlatDeg => 3,
        Format::AnglesRad => 2,
        Format::Cartesian => cols.len(),
    };

    let mut coords = Vec::new();
    let mut dropped = Vec::new();
    let mut rows_read = 0;
    let mut filtered = 0;
    let mut renormalized = 0;
    for result in reader.records() {
        rows_read += 1;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                dropped.push(DroppedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let parsed = (|| -> Result<Option<UnitVector>, String> {
            if let Some((i, f)) = filter_col {
                if field(&record, i, &f.column)? < f.min {
                    return Ok(None);
                }
            }
            let vals = cols
                .iter()
                .map(|(i, name)| field(&record, *i, name))
                .collect::<Result<Vec<f64>, String>>()?;
            let p = match format {
                Format::LonlatDeg => lonlat_to_unit(wrap_longitude(vals[0]), vals[1]),
                Format::AnglesRad => Ok(angle_to_unit(vals[0])),
                Format::Cartesian => {
                    let n = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if (n - 1.0).abs() > UNIT_SLACK {
                        renormalized += 1;
                    }
                    UnitVector::new(vals)
                }
            };
            p.map(Some).map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(Some(p)) => coords.extend_from_slice(p.as_slice()),
            Ok(None) => filtered += 1,
            Err(reason) => dropped.push(DroppedRow { line, reason }),
        }
    }
    if coords.is_empty() {
        return Err(IngestError::EmptyDataset {
            path: path.to_path_buf(),
            dropped: dropped.len(),
            filtered,
        });
    }
    let points = PointSet::new(dim, coords).expect("rows were normalized on parse");
    Ok(InputDataset {
        points,
        format,
        path: path.to_path_buf(),
        rows_read,
        dropped,
        filtered,
        renormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn lonlat_rows_wrap_and_convert() {
        let f = write("lon,lat\n270,0\n0,90\n");
        let d = ingest(f.path(), Format::LonlatDeg, None).unwrap();
        assert_eq!(d.points.len(), 2);
        assert!(close(d.points.row(0), &[0.0, -1.0, 0.0]));
        assert!(close(d.points.row(1), &[0.0, 0.0, 1.0]));
        assert_eq!(wrap_longitude(180.0), 180.0);
        assert_eq!(wrap_longitude(360.0), 0.0);
    }

    #[test]
    fn bad_rows_are_counted() {
        let f = write("lon,lat\n10,20\nabc,5\n0,95\n1\n");
        let d = ingest(f.path(), Format::LonlatDeg, None).unwrap();
        assert_eq!(d.rows_read, 4);
        assert_eq!(d.points.len(), 1);
        let lines: Vec<u64> = d.dropped.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
        assert!(d.dropped[1].reason.contains("95"));
    }

    #[test]
    fn cartesian_rows() {
        let f = write("x0,x1,x2,label\n0.6,0.8,0,a\n0,0,2,b\n0,0,0,c\n");
        let d = ingest(f.path(), Format::Cartesian, None).unwrap();
        assert_eq!(d.points.dim(), 3);
        assert_eq!(d.points.len(), 2);
        assert!(close(d.points.row(0), &[0.6, 0.8, 0.0]));
        assert!(close(d.points.row(1), &[0.0, 0.0, 1.0]));
        assert_eq!(d.renormalized, 2);
        assert_eq!(d.dropped.len(), 1);
    }

    #[test]
    fn angles_and_min_filter() {
        let f = write("theta,size\n0,1\n1.5707963267948966,7\n3.14,9\n");
        let filter: MinFilter = "size=5".parse().unwrap();
        let d = ingest(f.path(), Format::AnglesRad, Some(&filter)).unwrap();
        assert_eq!(d.points.len(), 2);
        assert_eq!(d.filtered, 1);
        assert!(close(d.points.row(0), &[0.0, 1.0]));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            ingest(Path::new("/no/such/file.csv"), Format::LonlatDeg, None),
            Err(IngestError::FileNotFound(_))
        ));
        let f = write("x,y\n1,2\n");
        assert!(matches!(
            ingest(f.path(), Format::LonlatDeg, None),
            Err(IngestError::MissingColumn { .. })
        ));
        let f = write("lon,lat\nfoo,bar\n");
        assert!(matches!(
            ingest(f.path(), Format::LonlatDeg, None),
            Err(IngestError::EmptyDataset { dropped: 1, .. })
        ));
    }
}
