//! `dirms verify`: runs the oracle suite against a dataset and configuration.
//!
//! Each check prints one line with its margin. Checks that need a working
//! model are skipped once the kernel, bandwidth or model construction fails.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use dirms::geometry::{exp_map, geodesic_distance, tangent_project};
use dirms::meanshift::{cluster, ms_converge, MsConfig};
use dirms::oracles::{fd_riemannian_gradient, fd_riemannian_hessian, grid_modes, sphere_integral, GridSpec};
use dirms::sampling::{sample_uniform_sphere, SeededRng};
use dirms::special::surface_area;
use dirms::{KdeModel, UnitVector};

use crate::args::{resolve_bandwidth, seed_or_random, ResolvedBandwidth, VerifyArgs};
use crate::ingest::ingest;
use crate::report::{create_dir, write_json, InputSummary};
use crate::Status;

const GRADIENT_TOL: f64 = 1e-5;
const HESSIAN_TOL: f64 = 1e-3;
const TWO_ROUTE_TOL: f64 = 1e-10;
const QUADRATURE_TOL: f64 = 1e-6;
const MC_TOL: f64 = 0.01;
const MC_POINTS: usize = 100_000;
const ASCENT_SLACK: f64 = 1e-12;
/// Kernel evaluations allowed for the quadrature normalization check before
/// falling back to Monte Carlo.
const QUADRATURE_BUDGET: f64 = 2e9;
const UNDERFLOW_PROBES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        let status = if pass { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { name, status, detail }
    }

    fn skip(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            status: CheckStatus::Skip,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub input: InputSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<ResolvedBandwidth>,
    pub kernel: String,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<String>,
    pub passed: bool,
    pub seconds: f64,
}

fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let s: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / s
}

/// Half the probes uniform on the sphere, half within about one bandwidth
/// of a random data point.
fn probe_points(model: &KdeModel, count: usize, rng: &mut SeededRng) -> Vec<UnitVector> {
    let q = model.q();
    let mut out = sample_uniform_sphere(q, count - count / 2, rng).to_unit_vectors();
    let dirs = sample_uniform_sphere(q, count / 2, rng);
    for k in 0..count / 2 {
        let x = model.data().point(rng.random_range(0..model.n()));
        let v = tangent_project(&x, dirs.row(k)).expect("matching dimension");
        let r = (model.bandwidth() * rng.random_range(0.2..1.5)).min(1.0);
        if v.norm() > 1e-8 {
            out.push(exp_map(&x, &v.scaled(r / v.norm())).expect("tangent vector"));
        }
    }
    out
}

fn derivative_checks(model: &KdeModel, probes: &[UnitVector]) -> Vec<Check> {
    let step = (0.02 * model.bandwidth()).clamp(1e-7, 1e-4);
    let usable: Vec<&UnitVector> = probes
        .iter()
        .filter(|x| {
            let f = model.density(x);
            f > 0.0 && f.is_finite() && model.riemannian_gradient(x).norm() > 0.0
        })
        .collect();
    let skipped = probes.len() - usable.len();
    if usable.is_empty() {
        let why = format!("no probe point has a representable density and gradient ({skipped} underflowed)");
        return vec![
            Check::new("gradient", false, why.clone()),
            Check::new("hessian", false, why.clone()),
            Check::new("hessian_two_route", false, why),
        ];
    }
    let results: Vec<(f64, Option<(f64, f64)>)> = usable
        .par_iter()
        .map(|x| {
            let g = model.riemannian_gradient(x);
            let fd = fd_riemannian_gradient(model, x, step).expect("valid step");
            let g_err = rel_norm(g.as_slice(), &fd);
            let hess = model.riemannian_hessian(x).ok().map(|rep| {
                let fdh = fd_riemannian_hessian(model, x, step).expect("valid step");
                let tilde = model.riemannian_hessian_tilde(x).expect("C2 kernel");
                let m = rep.matrix;
                (
                    m.max_abs_diff(&fdh) / m.max_abs(),
                    m.max_abs_diff(&tilde) / m.max_abs().max(1.0),
                )
            });
            (g_err, hess)
        })
        .collect();
    let worst = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0_f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let g_err = worst(&mut results.iter().map(|r| r.0));
    let suffix = format!("{} probes, {skipped} underflowed, step {step:.1e}", usable.len());
    let mut checks = vec![Check::new(
        "gradient",
        g_err < GRADIENT_TOL,
        format!("max relative error {g_err:.2e} (< {GRADIENT_TOL:.0e}); {suffix}"),
    )];
    if results.iter().any(|r| r.1.is_none()) {
        checks.push(Check::skip("hessian", "kernel has no second derivative"));
        checks.push(Check::skip("hessian_two_route", "kernel has no second derivative"));
    } else {
        let h_err = worst(&mut results.iter().map(|r| r.1.expect("checked").0));
        let lemma = worst(&mut results.iter().map(|r| r.1.expect("checked").1));
        checks.push(Check::new(
            "hessian",
            h_err < HESSIAN_TOL,
            format!("max relative error {h_err:.2e} (< {HESSIAN_TOL:.0e}) against finite differences"),
        ));
        checks.push(Check::new(
            "hessian_two_route",
            lemma < TWO_ROUTE_TOL,
            format!("max gap {lemma:.2e} (< {TWO_ROUTE_TOL:.0e}) between the two Hessian forms"),
        ));
    }
    checks
}

fn normalization_check(model: &KdeModel, rng: &mut SeededRng) -> Check {
    let (q, h, n) = (model.q(), model.bandwidth(), model.n() as f64);
    let nodes = match q {
        1 => Some((200.0 / h).ceil().max(1000.0)),
        2 => Some((12.0 / h).ceil().max(80.0)),
        3 => Some((12.0 / h).ceil().max(40.0)),
        _ => None,
    };
    let cost = nodes.map(|k| match q {
        1 => k * n,
        2 => 2.0 * k * k * n,
        _ => 2.0 * k * k * k * n,
    });
    if let (Some(k), Some(cost)) = (nodes, cost) {
        if cost <= QUADRATURE_BUDGET {
            let v = sphere_integral(|x| model.density(x), q, k as usize).expect("q <= 3");
            let err = (v - 1.0).abs();
            return Check::new(
                "normalization",
                err < QUADRATURE_TOL,
                format!("quadrature integral {v:.10} with {k} nodes, |I-1| = {err:.2e} (< {QUADRATURE_TOL:.0e})"),
            );
        }
    }
    let probes = sample_uniform_sphere(q, MC_POINTS, rng);
    let vals = model.densities(&probes);
    let area = surface_area(q);
    let mean = vals.iter().sum::<f64>() / MC_POINTS as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (MC_POINTS - 1) as f64;
    let (v, se) = (mean * area, (var / MC_POINTS as f64).sqrt() * area);
    let tol = MC_TOL.max(5.0 * se);
    Check::new(
        "normalization",
        (v - 1.0).abs() <= tol,
        format!("Monte Carlo integral {v:.4} ± {se:.4} from {MC_POINTS} points (tolerance {tol:.3})"),
    )
}

fn match_gap(a: &[UnitVector], b: &[UnitVector]) -> f64 {
    let directed = |from: &[UnitVector], to: &[UnitVector]| {
        from.iter()
            .map(|x| to.iter().map(|y| geodesic_distance(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

fn grid_check(model: &KdeModel, cfg: &MsConfig) -> Check {
    let res = match model.q() {
        1 => 4096,
        2 => 256,
        q => return Check::skip("grid_modes", format!("grid search is limited to q <= 2, data have q = {q}")),
    };
    let grid = GridSpec::new(model.q(), res).expect("q <= 2");
    let g = match grid_modes(model, &grid) {
        Ok(g) => g,
        Err(e) => return Check::new("grid_modes", false, format!("grid search failed: {e}")),
    };
    if g.flat {
        return Check::skip("grid_modes", "density is flat over the grid");
    }
    let c = match cluster(model, model.data(), cfg) {
        Ok(c) => c,
        Err(e) => return Check::new("grid_modes", false, format!("clustering failed: {e}")),
    };
    let gap = match_gap(&c.modes, &g.modes);
    Check::new(
        "grid_modes",
        c.n_modes() == g.modes.len() && gap <= cfg.merge_tol,
        format!(
            "mean shift {} modes, grid {} modes, max geodesic gap {gap:.2e} (<= merge_tol {})",
            c.n_modes(),
            g.modes.len(),
            cfg.merge_tol
        ),
    )
}

fn ascent_check(model: &KdeModel, cfg: &MsConfig, starts: usize) -> Check {
    let n = model.n();
    let k = starts.min(n).max(1);
    let traced = MsConfig {
        record_trace: true,
        ..*cfg
    };
    let (violations, steps, worst) = (0..k)
        .into_par_iter()
        .map(|j| {
            let path = ms_converge(model, &model.data().point(j * n / k), &traced);
            let mut v = 0usize;
            let mut worst = 0.0_f64;
            for w in path.densities.windows(2) {
                if w[0] > 0.0 {
                    let drop = (w[0] - w[1]) / w[0];
                    worst = worst.max(drop);
                    if drop > ASCENT_SLACK {
                        v += 1;
                    }
                }
            }
            (v, path.densities.len().saturating_sub(1), worst)
        })
        .reduce(|| (0, 0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)));
    Check::new(
        "ascent",
        violations == 0,
        format!("{violations} density decreases beyond relative {ASCENT_SLACK:.0e} over {steps} steps from {k} starts (largest relative drop {worst:.1e})"),
    )
}

fn underflow_diagnostic(model: &KdeModel, rng: &mut SeededRng) -> String {
    let probes = sample_uniform_sphere(model.q(), UNDERFLOW_PROBES, rng);
    let vals = model.densities(&probes);
    let zeros = vals.iter().filter(|v| **v == 0.0).count();
    let at_data = model.densities(model.data());
    let data_zeros = at_data.iter().filter(|v| **v == 0.0 || !v.is_finite()).count();
    format!(
        "underflow: density is 0 at {:.1}% of {UNDERFLOW_PROBES} uniform probes and non-representable at {data_zeros} of {} data points (h = {:.3e})",
        100.0 * zeros as f64 / UNDERFLOW_PROBES as f64,
        model.n(),
        model.bandwidth()
    )
}

pub fn run(args: &VerifyArgs) -> anyhow::Result<Status> {
    let start = Instant::now();
    let seed = seed_or_random(args.seed);
    let cfg = args.solver.config()?;
    let data = ingest(&args.data.input, args.data.format, args.data.min_filter.as_ref())?;
    let input = InputSummary::new(&data, args.data.min_filter.as_ref());
    eprintln!("{}", input.describe());
    let mut rng = SeededRng::new(seed);
    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();
    let mut bandwidth = None;

    let model = match args.model.kernel.build() {
        Err(e) => {
            checks.push(Check::new("kernel", false, e.to_string()));
            None
        }
        Ok(kernel) => {
            checks.push(Check::new("kernel", true, format!("{} passes the profile checks", args.model.kernel)));
            match resolve_bandwidth(&data.points, args.model.bandwidth, args.model.bandwidth_multiplier) {
                Err(e) => {
                    checks.push(Check::new("bandwidth", false, format!("{e:#}")));
                    None
                }
                Ok(b) => {
                    let h = b.h;
                    bandwidth = Some(b);
                    match KdeModel::new(data.points.clone(), h, kernel) {
                        Err(e) => {
                            checks.push(Check::new("model", false, e.to_string()));
                            None
                        }
                        Ok(m) => Some(m),
                    }
                }
            }
        }
    };

    match &model {
        Some(m) => {
            diagnostics.push(underflow_diagnostic(m, &mut rng));
            let probes = probe_points(m, args.probes.max(2), &mut rng);
            checks.extend(derivative_checks(m, &probes));
            checks.push(normalization_check(m, &mut rng));
            checks.push(grid_check(m, &cfg));
            checks.push(ascent_check(m, &cfg, args.ascent_starts));
        }
        None => {
            for name in ["gradient", "hessian", "hessian_two_route", "normalization", "grid_modes", "ascent"] {
                checks.push(Check::skip(name, "no valid model"));
            }
        }
    }

    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    for d in &diagnostics {
        println!("[INFO] {d}");
    }
    for c in &checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        };
        println!("[{tag}] {}: {}", c.name, c.detail);
    }
    let report = VerifyReport {
        command: "verify",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        input,
        bandwidth,
        kernel: args.model.kernel.to_string(),
        checks,
        diagnostics,
        passed,
        seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &args.output_dir {
        create_dir(dir)?;
        write_json(&dir.join("verify.json"), &report)?;
    }
    let failed = report.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
    if passed {
        println!("all checks passed");
        Ok(Status::Ok)
    } else {
        println!("{failed} check(s) failed");
        Ok(Status::VerifyFailed)
    }
}
