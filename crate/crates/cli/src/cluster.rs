//! `dirms cluster`: mode clustering of an input dataset.

use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use dirms::meanshift::{blurring_dms, cluster, ModeClustering, MsConfig, PathStatus};
use dirms::KdeModel;

use crate::args::{resolve_bandwidth, seed_or_random, ClusterArgs, ResolvedBandwidth};
use crate::ingest::ingest;
use crate::report::{
    create_dir, label_field, point_columns, point_fields, threads, write_json, InputSummary,
    Location, SolverEcho,
};
use crate::Status;

#[derive(Debug, Serialize)]
pub struct ModeEntry {
    pub index: usize,
    #[serde(flatten)]
    pub location: Location,
    pub density: f64,
    pub size: usize,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub clustering_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub input: InputSummary,
    pub q: usize,
    pub n: usize,
    pub bandwidth: ResolvedBandwidth,
    pub kernel: String,
    pub solver: SolverEcho,
    pub threads: usize,
    pub n_modes: usize,
    pub modes: Vec<ModeEntry>,
    pub max_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    pub n_converged: usize,
    pub all_converged: bool,
    pub labels: Vec<Option<usize>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub timing: Timing,
}

pub fn run_clustering(model: &KdeModel, cfg: &MsConfig, blurring: bool) -> dirms::Result<ModeClustering> {
    if blurring {
        blurring_dms(model, cfg)
    } else {
        cluster(model, model.data(), cfg)
    }
}

pub fn mode_entries(c: &ModeClustering) -> Vec<ModeEntry> {
    let sizes = c.cluster_sizes();
    c.modes
        .iter()
        .enumerate()
        .map(|(index, m)| ModeEntry {
            index,
            location: Location::of(m),
            density: c.mode_densities[index],
            size: sizes[index],
        })
        .collect()
}

pub fn run(args: &ClusterArgs) -> anyhow::Result<Status> {
    let start = Instant::now();
    let seed = seed_or_random(args.seed);
    let cfg = args.solver.config()?;
    let kernel = args.model.kernel.build()?;
    let data = ingest(&args.data.input, args.data.format, args.data.min_filter.as_ref())?;
    let input = InputSummary::new(&data, args.data.min_filter.as_ref());
    eprintln!("{}", input.describe());

    let bandwidth = resolve_bandwidth(&data.points, args.model.bandwidth, args.model.bandwidth_multiplier)?;
    let model = KdeModel::new(data.points.clone(), bandwidth.h, kernel)?;
    let t = Instant::now();
    let c = run_clustering(&model, &cfg, args.solver.blurring)?;
    let clustering_seconds = t.elapsed().as_secs_f64();

    create_dir(&args.output_dir)?;
    let labels_path = args.output_dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&labels_path)
        .with_context(|| format!("writing {}", labels_path.display()))?;
    let mut header = vec!["index".to_string()];
    header.extend(point_columns(model.dim()));
    header.extend(["label", "iterations", "converged"].map(String::from));
    w.write_record(&header)?;
    for i in 0..model.n() {
        let mut row = vec![i.to_string()];
        row.extend(point_fields(&model.data().point(i)));
        row.push(label_field(c.labels[i]));
        row.push(c.iterations[i].to_string());
        row.push((c.statuses[i] == PathStatus::Converged).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let report = RunReport {
        command: "cluster",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        input,
        q: model.q(),
        n: model.n(),
        bandwidth,
        kernel: args.model.kernel.to_string(),
        solver: SolverEcho::new(&cfg, args.solver.blurring),
        threads: threads(),
        n_modes: c.n_modes(),
        modes: mode_entries(&c),
        max_iterations: c.max_iterations(),
        sweeps: c.sweeps,
        n_converged: c.n_converged(),
        all_converged: c.all_converged(),
        labels: c.labels.clone(),
        iterations: c.iterations.clone(),
        converged: c.statuses.iter().map(|s| *s == PathStatus::Converged).collect(),
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            clustering_seconds,
        },
    };
    write_json(&args.output_dir.join("report.json"), &report)?;

    println!(
        "h = {:.6} ({}), {} modes, {} of {} points converged, max iterations {}",
        report.bandwidth.h,
        report.bandwidth.mode,
        report.n_modes,
        report.n_converged,
        report.n,
        report.max_iterations
    );
    Ok(if report.all_converged {
        Status::Ok
    } else {
        eprintln!("warning: {} points did not converge", report.n - report.n_converged);
        Status::PartialConvergence
    })
}
