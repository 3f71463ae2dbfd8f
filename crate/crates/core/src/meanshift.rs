//! Directional mean shift.
//!
//! One step maps `y` to `−Σ Xᵢ L′((1 − yᵀXᵢ)/h²)` normalized to unit length,
//! which is the direction of the total gradient `∇f̂(y)`. Iterating climbs
//! the KDE monotonically for convex, decreasing profiles. The same path is a
//! Riemannian gradient ascent along geodesics with an adaptive step size.
//!
//! Clustering runs the iteration from every query point and merges terminal
//! points closer than `merge_tol` (geodesic) by single linkage.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::KdeModel;
use crate::geometry::{dot, exp_raw, geodesic_raw, norm, project_raw, PointSet, UnitVector};

/// Iteration and merging parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsConfig {
    /// Stop once `1 − y_{s+1}ᵀ y_s ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Geodesic radius (radians) for merging terminal points into modes.
    pub merge_tol: f64,
    /// Keep every iterate and its density.
    pub record_trace: bool,
}

impl Default for MsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 1000,
            merge_tol: 1e-2,
            record_trace: false,
        }
    }
}

impl MsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.merge_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "merge_tol must be positive, got {}",
                self.merge_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Converged,
    MaxIterExceeded,
    /// The step numerator vanished; the path stopped at its last point.
    DegenerateStep,
}

/// The sequence of iterates from one starting point.
#[derive(Debug, Clone)]
pub struct ModePath {
    /// All iterates starting with `y0` when tracing, otherwise only the last.
    pub points: Vec<UnitVector>,
    /// KDE values matching `points`.
    pub densities: Vec<f64>,
    pub status: PathStatus,
    /// Number of steps taken.
    pub iterations: usize,
}

impl ModePath {
    pub fn converged(&self) -> bool {
        self.status == PathStatus::Converged
    }

    pub fn terminal(&self) -> &UnitVector {
        self.points.last().expect("paths hold at least one point")
    }

    pub fn terminal_density(&self) -> f64 {
        *self.densities.last().expect("paths hold at least one density")
    }
}

/// `1 − aᵀb` for unit vectors, evaluated as `½‖a − b‖²` to avoid cancellation.
pub fn one_minus_dot(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

// Numerators smaller than this fraction of the total weight are rounding noise.
const DEGENERATE_RATIO: f64 = 1e-14;

fn step_raw(model: &KdeModel, y: &[f64]) -> Result<Vec<f64>> {
    let s = model.deriv_weighted_sum(y);
    let n = norm(&s.direction);
    let total: f64 = model
        .data()
        .rows()
        .map(|xi| {
            let l = model
                .kernel()
                .signed_ln_deriv((1.0 - dot(y, xi)) / model.bandwidth().powi(2));
            (l.ln_abs - s.ln_scale).exp()
        })
        .sum();
    if !(n > DEGENERATE_RATIO * total) || !n.is_finite() {
        return Err(Error::DegenerateStep {
            norm: n * s.ln_scale.exp(),
        });
    }
    Ok(s.direction.iter().map(|v| -v / n).collect())
}

/// One fixed-point step `y ← −Σ Xᵢ L′ / ‖Σ Xᵢ L′‖`.
pub fn ms_step(model: &KdeModel, y: &UnitVector) -> Result<UnitVector> {
    check_dim(model, y)?;
    UnitVector::new(step_raw(model, y.as_slice())?)
}

fn check_dim(model: &KdeModel, y: &UnitVector) -> Result<()> {
    if y.dim() != model.dim() {
        return Err(Error::WrongDimension {
            expected: model.dim(),
            actual: y.dim(),
        });
    }
    Ok(())
}

struct Tracker {
    record: bool,
    points: Vec<UnitVector>,
    densities: Vec<f64>,
}

impl Tracker {
    fn new(model: &KdeModel, y0: &UnitVector, record: bool) -> Self {
        let mut t = Self {
            record,
            points: Vec::new(),
            densities: Vec::new(),
        };
        if record {
            t.points.push(y0.clone());
            t.densities.push(model.density(y0));
        }
        t
    }

    fn push(&mut self, model: &KdeModel, y: &UnitVector) {
        if self.record {
            self.points.push(y.clone());
            self.densities.push(model.density(y));
        }
    }

    fn finish(mut self, model: &KdeModel, last: UnitVector, status: PathStatus, iterations: usize) -> ModePath {
        if !self.record || self.points.is_empty() {
            self.densities = vec![model.density(&last)];
            self.points = vec![last];
        }
        ModePath {
            points: self.points,
            densities: self.densities,
            status,
            iterations,
        }
    }
}

fn iterate<F>(model: &KdeModel, y0: &UnitVector, config: &MsConfig, mut step: F) -> ModePath
where
    F: FnMut(&UnitVector) -> Result<Option<UnitVector>>,
{
    let mut tracker = Tracker::new(model, y0, config.record_trace);
    let mut y = y0.clone();
    for it in 1..=config.max_iter {
        let next = match step(&y) {
            Ok(Some(next)) => next,
            // zero gradient: y is a fixed point
            Ok(None) => y.clone(),
            Err(_) => return tracker.finish(model, y, PathStatus::DegenerateStep, it - 1),
        };
        let delta = one_minus_dot(next.as_slice(), y.as_slice());
        tracker.push(model, &next);
        y = next;
        if delta <= config.tol {
            return tracker.finish(model, y, PathStatus::Converged, it);
        }
    }
    tracker.finish(model, y, PathStatus::MaxIterExceeded, config.max_iter)
}

/// Iterates [`ms_step`] from `y0` until `1 − y_{s+1}ᵀ y_s ≤ tol` or
/// `max_iter` steps.
pub fn ms_converge(model: &KdeModel, y0: &UnitVector, config: &MsConfig) -> ModePath {
    iterate(model, y0, config, |y| ms_step(model, y).map(Some))
}

/// `θ / (sin θ ‖d‖)` for the scaled gradient direction `d`, so that the true
/// step is this value times `exp(−ln_scale)`.
fn adaptive_step_scaled(y: &[f64], direction: &[f64]) -> Result<f64> {
    let gn = norm(direction);
    if gn == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let unit: Vec<f64> = direction.iter().map(|v| v / gn).collect();
    let theta = geodesic_raw(y, &unit);
    let s = theta.sin();
    if theta == 0.0 || s <= 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(theta / (s * gn))
}

/// Step size `η = θ / (sin θ ‖∇f̂(y)‖)`, `θ` the angle between `y` and its
/// mean-shift image, so that `Exp_y(η grad f̂(y))` equals the mean-shift step.
pub fn adaptive_step_size(model: &KdeModel, y: &UnitVector) -> Result<f64> {
    check_dim(model, y)?;
    let g = model.total_gradient_hat_scaled(y);
    Ok(adaptive_step_scaled(y.as_slice(), &g.direction)? * (-g.ln_scale).exp())
}

/// How gradient ascent picks its step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// [`adaptive_step_size`] at every iterate.
    Adaptive,
}

/// Riemannian gradient ascent `y ← Exp_y(η grad f̂(y))`.
pub fn gradient_ascent(model: &KdeModel, y0: &UnitVector, rule: StepRule, config: &MsConfig) -> Result<ModePath> {
    check_dim(model, y0)?;
    if let StepRule::Fixed(eta) = rule {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be nonnegative, got {eta}")));
        }
    }
    Ok(iterate(model, y0, config, |y| {
        let g = model.total_gradient_hat_scaled(y);
        let tangent = project_raw(y.as_slice(), &g.direction);
        let eta = match rule {
            StepRule::Fixed(eta) => eta * g.ln_scale.exp(),
            StepRule::Adaptive => match adaptive_step_scaled(y.as_slice(), &g.direction) {
                Ok(eta) => eta,
                Err(Error::ZeroGradient) => return Ok(None),
                Err(e) => return Err(e),
            },
        };
        let v: Vec<f64> = tangent.iter().map(|t| t * eta).collect();
        Ok(Some(exp_raw(y, &v)))
    }))
}

/// [`gradient_ascent`] with a constant step `eta`.
pub fn gradient_ascent_fixed_step(model: &KdeModel, y0: &UnitVector, eta: f64, config: &MsConfig) -> Result<ModePath> {
    gradient_ascent(model, y0, StepRule::Fixed(eta), config)
}

/// Modes, per-point assignments and convergence records.
#[derive(Debug, Clone)]
pub struct ModeClustering {
    pub modes: Vec<UnitVector>,
    /// KDE value at each mode.
    pub mode_densities: Vec<f64>,
    /// Mode index per query point; `None` for points that did not converge.
    pub labels: Vec<Option<usize>>,
    pub iterations: Vec<usize>,
    pub statuses: Vec<PathStatus>,
    /// Full paths when `record_trace` is set (plain mean shift only).
    pub paths: Option<Vec<ModePath>>,
    /// Number of blurring sweeps, for the blurring variant.
    pub sweeps: Option<usize>,
    pub config: MsConfig,
}

impl ModeClustering {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Iteration count for the whole batch: the maximum over points.
    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn n_converged(&self) -> usize {
        self.statuses.iter().filter(|s| **s == PathStatus::Converged).count()
    }

    pub fn all_converged(&self) -> bool {
        self.n_converged() == self.statuses.len()
    }

    /// Points assigned to each mode.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.modes.len()];
        for l in self.labels.iter().flatten() {
            sizes[*l] += 1;
        }
        sizes
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage merge of terminal points. Groups are numbered in order of
/// their lowest member index; each mode is the member with the highest
/// density, ties going to the lowest index.
fn merge_terminals(
    terminals: &[Option<(UnitVector, f64)>],
    merge_tol: f64,
) -> (Vec<UnitVector>, Vec<f64>, Vec<Option<usize>>) {
    let idx: Vec<usize> = (0..terminals.len()).filter(|&i| terminals[i].is_some()).collect();
    let mut parent: Vec<usize> = (0..terminals.len()).collect();
    let pt = |i: usize| terminals[i].as_ref().expect("filtered").0.as_slice();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            if geodesic_raw(pt(i), pt(j)) <= merge_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut group_of_root = vec![usize::MAX; terminals.len()];
    let mut best: Vec<usize> = Vec::new();
    let mut labels = vec![None; terminals.len()];
    for &i in &idx {
        let r = find(&mut parent, i);
        if group_of_root[r] == usize::MAX {
            group_of_root[r] = best.len();
            best.push(i);
        }
        let g = group_of_root[r];
        labels[i] = Some(g);
        let di = terminals[i].as_ref().expect("filtered").1;
        let db = terminals[best[g]].as_ref().expect("filtered").1;
        if di > db {
            best[g] = i;
        }
    }
    let modes = best.iter().map(|&i| terminals[i].as_ref().expect("filtered").0.clone()).collect();
    let dens = best.iter().map(|&i| terminals[i].as_ref().expect("filtered").1).collect();
    (modes, dens, labels)
}

/// Mean-shift clustering of `queries` (commonly the data itself).
pub fn cluster(model: &KdeModel, queries: &PointSet, config: &MsConfig) -> Result<ModeClustering> {
    config.validate()?;
    if queries.dim() != model.dim() {
        return Err(Error::WrongDimension {
            expected: model.dim(),
            actual: queries.dim(),
        });
    }
    let paths: Vec<ModePath> = (0..queries.len())
        .into_par_iter()
        .map(|i| ms_converge(model, &queries.point(i), config))
        .collect();
    let terminals: Vec<_> = paths
        .iter()
        .map(|p| p.converged().then(|| (p.terminal().clone(), p.terminal_density())))
        .collect();
    let (modes, mode_densities, labels) = merge_terminals(&terminals, config.merge_tol);
    Ok(ModeClustering {
        modes,
        mode_densities,
        labels,
        iterations: paths.iter().map(|p| p.iterations).collect(),
        statuses: paths.iter().map(|p| p.status).collect(),
        paths: config.record_trace.then_some(paths),
        sweeps: None,
        config: *config,
    })
}

/// Entropy change below which blurring stops.
pub const BLURRING_ENTROPY_TOL: f64 = 1e-8;

/// Shannon entropy of the displacement histogram with `⌈0.9 n⌉` equal-width
/// bins on `[0, max e]`.
pub fn displacement_entropy(e: &[f64]) -> f64 {
    let n = e.len();
    let max = e.iter().copied().fold(0.0, f64::max);
    if n == 0 || max == 0.0 {
        return 0.0;
    }
    let bins = ((0.9 * n as f64).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &v in e {
        counts[((v * bins as f64 / max) as usize).min(bins - 1)] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Blurring mean shift: every sweep moves all points one step on the KDE of
/// the current point set, then replaces the point set. Stops when the
/// displacement entropy changes by at most [`BLURRING_ENTROPY_TOL`] or the
/// mean displacement is at most `tol`. Final points are merged as in
/// [`cluster`], with densities from the original model.
pub fn blurring_dms(model: &KdeModel, config: &MsConfig) -> Result<ModeClustering> {
    config.validate()?;
    let n = model.n();
    let mut current = model.clone();
    let mut alive = vec![true; n];
    let mut prev_entropy: Option<f64> = None;
    let mut sweeps = 0;
    let mut stopped = false;
    while sweeps < config.max_iter {
        sweeps += 1;
        let steps: Vec<Option<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let y = current.data().row(i);
                if !alive[i] {
                    return None;
                }
                step_raw(&current, y).ok()
            })
            .collect();
        let mut coords = Vec::with_capacity(n * model.dim());
        let mut e = Vec::with_capacity(n);
        for (i, s) in steps.iter().enumerate() {
            let old = current.data().row(i);
            match s {
                Some(new) => {
                    e.push(old.iter().zip(new).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
                    coords.extend_from_slice(new);
                }
                None => {
                    alive[i] = false;
                    e.push(0.0);
                    coords.extend_from_slice(old);
                }
            }
        }
        current = current.with_data(PointSet::new(model.dim(), coords)?)?;
        let mean = e.iter().sum::<f64>() / n as f64;
        let entropy = displacement_entropy(&e);
        let flat = prev_entropy.is_some_and(|p| (entropy - p).abs() <= BLURRING_ENTROPY_TOL);
        prev_entropy = Some(entropy);
        if mean <= config.tol || flat {
            stopped = true;
            break;
        }
    }
    let status = |i: usize| match (alive[i], stopped) {
        (false, _) => PathStatus::DegenerateStep,
        (true, true) => PathStatus::Converged,
        (true, false) => PathStatus::MaxIterExceeded,
    };
    let statuses: Vec<PathStatus> = (0..n).map(status).collect();
    let terminals: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            (statuses[i] == PathStatus::Converged).then(|| {
                let p = current.data().point(i);
                let d = model.density(&p);
                (p, d)
            })
        })
        .collect();
    let (modes, mode_densities, labels) = merge_terminals(&terminals, config.merge_tol);
    Ok(ModeClustering {
        modes,
        mode_densities,
        labels,
        iterations: vec![sweeps; n],
        statuses,
        paths: None,
        sweeps: Some(sweeps),
        config: *config,
    })
}
