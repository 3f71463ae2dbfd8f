//! `dirms density`: the density estimate tabulated on a regular grid.

use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{bail, Context};
use serde::Serialize;

use dirms::geometry::{angle_to_unit, lonlat_to_unit};
use dirms::{KdeModel, PointSet, UnitVector};

use crate::args::{resolve_bandwidth, seed_or_random, DensityArgs, GridRes, ResolvedBandwidth};
use crate::ingest::ingest;
use crate::report::{create_dir, write_json, InputSummary};
use crate::Status;

/// Relative deviation of the grid integral from 1 above which a warning is printed.
const INTEGRAL_WARN: f64 = 0.01;

#[derive(Debug, Serialize)]
pub struct DensityReport {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub input: InputSummary,
    pub q: usize,
    pub bandwidth: ResolvedBandwidth,
    pub kernel: String,
    pub grid: Vec<usize>,
    /// Trapezoid-rule integral of the tabulated density over the sphere.
    pub integral: f64,
    pub max_density: f64,
    pub max_at: Vec<f64>,
    pub seconds: f64,
}

/// A tabulated grid: nodes, quadrature weights and the CSV coordinates of each node.
struct Grid {
    points: Vec<UnitVector>,
    weights: Vec<f64>,
    labels: Vec<Vec<f64>>,
    header: Vec<&'static str>,
    shape: Vec<usize>,
}

/// `n` angles covering `[−π, π)` with equal weights.
fn circle_grid(n: usize) -> Grid {
    let mut g = Grid {
        points: Vec::with_capacity(n),
        weights: vec![2.0 * PI / n as f64; n],
        labels: Vec::with_capacity(n),
        header: vec!["theta", "density"],
        shape: vec![n],
    };
    for i in 0..n {
        let t = -PI + 2.0 * PI * i as f64 / n as f64;
        g.points.push(angle_to_unit(t));
        g.labels.push(vec![t]);
    }
    g
}

/// Longitudes over `[−180, 180]` and latitudes over `[−90, 90]`, both
/// endpoints included, with trapezoid weights times `cos(lat)`.
fn sphere_grid(nlon: usize, nlat: usize) -> Grid {
    let dlon = 2.0 * PI / (nlon - 1) as f64;
    let dlat = PI / (nlat - 1) as f64;
    let mut g = Grid {
        points: Vec::with_capacity(nlon * nlat),
        weights: Vec::with_capacity(nlon * nlat),
        labels: Vec::with_capacity(nlon * nlat),
        header: vec!["lon", "lat", "density"],
        shape: vec![nlon, nlat],
    };
    let end = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    for j in 0..nlat {
        let lat = -90.0 + 180.0 * j as f64 / (nlat - 1) as f64;
        for i in 0..nlon {
            let lon = -180.0 + 360.0 * i as f64 / (nlon - 1) as f64;
            g.points.push(lonlat_to_unit(lon, lat).expect("latitude in range"));
            g.weights
                .push(end(i, nlon) * end(j, nlat) * dlon * dlat * lat.to_radians().cos());
            g.labels.push(vec![lon, lat]);
        }
    }
    g
}

pub fn run(args: &DensityArgs) -> anyhow::Result<Status> {
    let start = Instant::now();
    let seed = seed_or_random(args.seed);
    let kernel = args.model.kernel.build()?;
    let data = ingest(&args.data.input, args.data.format, args.data.min_filter.as_ref())?;
    let input = InputSummary::new(&data, args.data.min_filter.as_ref());
    eprintln!("{}", input.describe());
    let q = data.points.q();
    let grid = match (q, args.grid_res) {
        (1, None) => circle_grid(360),
        (1, Some(GridRes::Single(n))) => circle_grid(n),
        (2, None) => sphere_grid(181, 91),
        (2, Some(GridRes::LonLat(a, b))) => sphere_grid(a, b),
        (1, Some(GridRes::LonLat(..))) => bail!("circle data take a single grid size, e.g. --grid-res 360"),
        (2, Some(GridRes::Single(_))) => bail!("sphere data take NLONxNLAT, e.g. --grid-res 181x91"),
        _ => bail!("density grids are available for q = 1 or 2, got q = {q}"),
    };

    let bandwidth = resolve_bandwidth(&data.points, args.model.bandwidth, args.model.bandwidth_multiplier)?;
    let model = KdeModel::new(data.points, bandwidth.h, kernel)?;
    let values = model.densities(&PointSet::from_unit_vectors(&grid.points)?);
    let integral: f64 = values.iter().zip(&grid.weights).map(|(f, w)| f * w).sum();
    let (imax, &max_density) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");

    create_dir(&args.output_dir)?;
    let path = args.output_dir.join("density.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(&grid.header)?;
    for (coords, f) in grid.labels.iter().zip(&values) {
        let mut row: Vec<String> = coords.iter().map(f64::to_string).collect();
        row.push(f.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let report = DensityReport {
        command: "density",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        input,
        q,
        bandwidth,
        kernel: args.model.kernel.to_string(),
        grid: grid.shape,
        integral,
        max_density,
        max_at: grid.labels[imax].clone(),
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&args.output_dir.join("density_report.json"), &report)?;
    println!(
        "h = {:.6}, {} grid nodes, integral {:.6}, max density {:.6e}",
        report.bandwidth.h,
        values.len(),
        integral,
        max_density
    );
    if (integral - 1.0).abs() > INTEGRAL_WARN {
        eprintln!(
            "warning: grid integral {integral:.4} is off by more than 1%; the grid is too coarse for h = {:.3e}",
            report.bandwidth.h
        );
    }
    Ok(Status::Ok)
}
