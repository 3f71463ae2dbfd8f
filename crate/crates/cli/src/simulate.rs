//! `dirms simulate`: repeated draws from a test scenario with misclassification rates.

use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context};
use serde::Serialize;

use dirms::meanshift::MsConfig;
use dirms::metrics::{misclassification_rate, spearman};
use dirms::sampling::{embed_angles, sample_circular_f1, sample_mixture, MixtureSpec, SeededRng};
use dirms::{DirectionalKernel, KdeModel, PointSet, UnitVector};

use crate::args::{resolve_bandwidth, seed_or_random, Bandwidth, Scenario, SimulateArgs};
use crate::cluster::run_clustering;
use crate::report::{create_dir, label_field, point_columns, point_fields, threads, write_json, SolverEcho};
use crate::Status;

const CIRCULAR_H: f64 = 0.3;
const SPHERE1_NU: f64 = 5.0;

#[derive(Debug, Clone, Serialize)]
pub struct RepeatResult {
    pub q: usize,
    pub repeat: usize,
    pub n: usize,
    pub h: f64,
    pub n_modes: usize,
    pub misclassification: f64,
    pub max_iterations: usize,
    pub sweeps: Option<usize>,
    pub all_converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub q: usize,
    pub repeats: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub version: &'static str,
    pub scenario: Scenario,
    pub seed: u64,
    pub n: usize,
    pub q: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub repeats: usize,
    pub bandwidth: String,
    pub bandwidth_multiplier: f64,
    pub kernel: String,
    pub solver: SolverEcho,
    pub threads: usize,
    pub results: Vec<RepeatResult>,
    pub summary: Vec<Summary>,
    /// Spearman correlation between q and mean misclassification, for sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman_q: Option<f64>,
    pub seconds: f64,
}

fn draw(scenario: Scenario, q: usize, n: usize, nu: f64, rng: &mut SeededRng) -> anyhow::Result<(PointSet, Vec<usize>)> {
    Ok(match scenario {
        Scenario::Circular => {
            let (angles, truth) = sample_circular_f1(n, rng);
            (embed_angles(&angles), truth)
        }
        Scenario::Sphere1 => sample_mixture(&MixtureSpec::single(UnitVector::basis(3, 0), SPHERE1_NU)?, n, rng),
        Scenario::Sphere3 => sample_mixture(&MixtureSpec::three_mode(), n, rng),
        Scenario::Hyperq => sample_mixture(&MixtureSpec::hyperq(q, nu)?, n, rng),
    })
}

pub fn summarize(q: usize, rates: &[f64]) -> Summary {
    let k = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / k;
    let sd = if rates.len() > 1 {
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary {
        q,
        repeats: rates.len(),
        mean,
        sd,
        min: rates.iter().copied().fold(f64::INFINITY, f64::min),
        max: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn write_dataset(path: &Path, data: &PointSet, truth: &[usize], labels: &[Option<usize>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = point_columns(data.dim());
    header.extend(["truth", "label"].map(String::from));
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row = point_fields(&data.point(i));
        row.push(truth[i].to_string());
        row.push(label_field(labels[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

struct Setup<'a> {
    args: &'a SimulateArgs,
    cfg: MsConfig,
    kernel: DirectionalKernel,
    bandwidth: Bandwidth,
    n: usize,
    seed: u64,
}

fn run_repeat(s: &Setup, q: usize, repeat: usize) -> anyhow::Result<RepeatResult> {
    let mut rng = SeededRng::new(s.seed).stream(((q as u64) << 32) | repeat as u64);
    let (data, truth) = draw(s.args.scenario, q, s.n, s.args.nu, &mut rng)?;
    let h = resolve_bandwidth(&data, s.bandwidth, s.args.bandwidth_multiplier)?.h;
    let model = KdeModel::new(data, h, s.kernel.clone())?;
    let c = run_clustering(&model, &s.cfg, s.args.solver.blurring)?;
    let rate = misclassification_rate(&c.labels, &truth)?;
    let name = format!("{}_q{q}_r{repeat}.csv", s.args.scenario);
    write_dataset(&s.args.output_dir.join("data").join(name), model.data(), &truth, &c.labels)?;
    Ok(RepeatResult {
        q,
        repeat,
        n: s.n,
        h,
        n_modes: c.n_modes(),
        misclassification: rate,
        max_iterations: c.max_iterations(),
        sweeps: c.sweeps,
        all_converged: c.all_converged(),
    })
}

pub fn run(args: &SimulateArgs) -> anyhow::Result<Status> {
    let start = Instant::now();
    let seed = seed_or_random(args.seed);
    let cfg = args.solver.config()?;
    let kernel = args.kernel.build()?;
    ensure!(args.repeats >= 1, "--repeats must be at least 1");
    let n = args.n.unwrap_or(match args.scenario {
        Scenario::Circular => 60,
        _ => 1000,
    });
    ensure!(n >= 2, "--n must be at least 2");
    let qs: Vec<usize> = match args.scenario {
        Scenario::Circular => vec![1],
        Scenario::Sphere1 | Scenario::Sphere3 => vec![2],
        Scenario::Hyperq => {
            let hi = args.q_max.unwrap_or(args.q);
            ensure!(args.q >= 3 && hi >= args.q, "hyperq needs 3 <= q <= q_max, got q = {} and q_max = {hi}", args.q);
            (args.q..=hi).collect()
        }
    };
    let bandwidth = args.bandwidth.unwrap_or(match args.scenario {
        Scenario::Circular => Bandwidth::Fixed(CIRCULAR_H),
        _ => Bandwidth::Auto,
    });
    create_dir(&args.output_dir.join("data"))?;
    let setup = Setup {
        args,
        cfg,
        kernel,
        bandwidth,
        n,
        seed,
    };

    let mut results = Vec::new();
    let mut summary = Vec::new();
    for &q in &qs {
        let mut rates = Vec::new();
        for repeat in 0..args.repeats {
            let r = run_repeat(&setup, q, repeat)?;
            eprintln!(
                "{} q={q} repeat {repeat}: h = {:.4}, {} modes, misclassification {:.4}",
                args.scenario, r.h, r.n_modes, r.misclassification
            );
            rates.push(r.misclassification);
            results.push(r);
        }
        summary.push(summarize(q, &rates));
    }
    let spearman_q = if summary.len() >= 2 {
        let x: Vec<f64> = summary.iter().map(|s| s.q as f64).collect();
        let y: Vec<f64> = summary.iter().map(|s| s.mean).collect();
        Some(spearman(&x, &y)?)
    } else {
        None
    };

    let mut w = csv::Writer::from_path(args.output_dir.join("rates.csv"))?;
    for r in &results {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(args.output_dir.join("summary.csv"))?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush()?;

    let all_converged = results.iter().all(|r| r.all_converged);
    let report = SimulateReport {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        scenario: args.scenario,
        seed,
        n,
        q: qs,
        nu: (args.scenario == Scenario::Hyperq).then_some(args.nu),
        repeats: args.repeats,
        bandwidth: match bandwidth {
            Bandwidth::Auto => "auto".into(),
            Bandwidth::Fixed(h) => h.to_string(),
        },
        bandwidth_multiplier: args.bandwidth_multiplier,
        kernel: args.kernel.to_string(),
        solver: SolverEcho::new(&setup.cfg, args.solver.blurring),
        threads: threads(),
        results,
        summary,
        spearman_q,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&args.output_dir.join("report.json"), &report)?;
    for s in &report.summary {
        println!(
            "{} q={}: mean misclassification {:.4} (sd {:.4}) over {} repeats",
            args.scenario, s.q, s.mean, s.sd, s.repeats
        );
    }
    if let Some(rho) = report.spearman_q {
        println!("spearman(q, mean misclassification) = {rho:.3}");
    }
    Ok(if all_converged {
        Status::Ok
    } else {
        eprintln!("warning: some points did not converge");
        Status::PartialConvergence
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = summarize(3, &[0.1, 0.2, 0.3]);
        assert!((s.mean - 0.2).abs() < 1e-15);
        assert!((s.sd - 0.1).abs() < 1e-15);
        assert_eq!((s.min, s.max), (0.1, 0.3));
        assert_eq!(summarize(3, &[0.5]).sd, 0.0);
    }
}
