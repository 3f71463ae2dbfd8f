//! Brute-force references for checking the estimators and the mean-shift
//! engine: finite differences, dense grid mode search and sphere quadrature.
//!
//! Derivatives here come only from values of the ambient KDE extension
//! `f̃`, never from the analytic gradient code.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimators::KdeModel;
use crate::geometry::{geodesic_distance, lonlat_to_unit, angle_to_unit, PointSet, UnitVector};
use crate::linalg::Matrix;
use crate::meanshift::ms_step;
use crate::special::gauss_legendre;

fn check_step(step: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must lie in [1e-7, 1e-3], got {step}"
        )));
    }
    Ok(())
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Fourth-order central differences of `f̃` at the ambient point `x`.
pub fn fd_gradient(model: &KdeModel, x: &[f64], step: f64) -> Result<Vec<f64>> {
    check_step(step)?;
    let f = |moves: &[(usize, f64)]| model.density_alt(&shifted(x, moves));
    (0..x.len())
        .map(|i| {
            let a = f(&[(i, -2.0 * step)])?;
            let b = f(&[(i, -step)])?;
            let c = f(&[(i, step)])?;
            let d = f(&[(i, 2.0 * step)])?;
            Ok((a - 8.0 * b + 8.0 * c - d) / (12.0 * step))
        })
        .collect()
}

/// Second-order central differences for the ambient Hessian of `f̃`.
pub fn fd_hessian(model: &KdeModel, x: &[f64], step: f64) -> Result<Matrix> {
    check_step(step)?;
    let f = |moves: &[(usize, f64)]| model.density_alt(&shifted(x, moves));
    let d = x.len();
    let f0 = f(&[])?;
    let mut h = Matrix::zeros(d);
    for i in 0..d {
        h[(i, i)] = (f(&[(i, step)])? - 2.0 * f0 + f(&[(i, -step)])?) / (step * step);
        for j in 0..i {
            let v = (f(&[(i, step), (j, step)])? - f(&[(i, step), (j, -step)])?
                - f(&[(i, -step), (j, step)])?
                + f(&[(i, -step), (j, -step)])?)
                / (4.0 * step * step);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

fn projector(x: &[f64]) -> Matrix {
    let mut p = Matrix::identity(x.len());
    p.add_outer(-1.0, x, x);
    p
}

/// `(I − xxᵀ)` applied to the finite-difference gradient.
pub fn fd_riemannian_gradient(model: &KdeModel, x: &UnitVector, step: f64) -> Result<Vec<f64>> {
    let g = fd_gradient(model, x.as_slice(), step)?;
    Ok(projector(x.as_slice()).mul_vec(&g))
}

/// `P [∇∇f̃ − (xᵀ∇f̃) I] P` from finite differences.
pub fn fd_riemannian_hessian(model: &KdeModel, x: &UnitVector, step: f64) -> Result<Matrix> {
    let xs = x.as_slice();
    let g = fd_gradient(model, xs, step.min(1e-4))?;
    let radial: f64 = xs.iter().zip(&g).map(|(a, b)| a * b).sum();
    let mut h = fd_hessian(model, xs, step)?;
    for i in 0..xs.len() {
        h[(i, i)] -= radial;
    }
    let p = projector(xs);
    Ok(p.mul(&h).mul(&p))
}

/// A regular angular grid on `Ω_1` or `Ω_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    q: usize,
    resolution: usize,
}

impl GridSpec {
    /// `resolution` nodes around the circle; on `Ω_2` the same number of
    /// longitudes and `resolution / 2 + 1` latitude rows including the poles.
    pub fn new(q: usize, resolution: usize) -> Result<Self> {
        if q > 2 || q == 0 {
            return Err(Error::DimensionTooLarge { q });
        }
        if resolution < 16 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 16, got {resolution}"
            )));
        }
        Ok(Self { q, resolution })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Angular spacing between neighboring nodes.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.resolution as f64
    }
}

/// Output of [`grid_modes`].
#[derive(Debug, Clone)]
pub struct GridModes {
    pub modes: Vec<UnitVector>,
    /// Set when the density varies by less than 0.1% over the grid, so strict
    /// maxima are not meaningful.
    pub flat: bool,
}

/// Nodes of a grid as unit vectors with their neighbor lists.
fn grid_graph(grid: &GridSpec) -> (Vec<UnitVector>, Vec<Vec<usize>>) {
    let r = grid.resolution;
    if grid.q == 1 {
        let nodes = (0..r).map(|k| angle_to_unit(grid.spacing() * k as f64)).collect();
        let nbrs = (0..r).map(|k| vec![(k + r - 1) % r, (k + 1) % r]).collect();
        return (nodes, nbrs);
    }
    let rows = r / 2 + 1;
    let lat = |i: usize| -90.0 + 180.0 * i as f64 / (rows - 1) as f64;
    let lon = |j: usize| -180.0 + 360.0 * j as f64 / r as f64;
    // node 0 is the south pole, the last node the north pole
    let mut nodes = vec![lonlat_to_unit(0.0, -90.0).expect("pole")];
    for i in 1..rows - 1 {
        for j in 0..r {
            nodes.push(lonlat_to_unit(lon(j), lat(i)).expect("valid latitude"));
        }
    }
    nodes.push(lonlat_to_unit(0.0, 90.0).expect("pole"));
    let north = nodes.len() - 1;
    let id = |i: usize, j: usize| -> usize {
        if i == 0 {
            0
        } else if i == rows - 1 {
            north
        } else {
            1 + (i - 1) * r + (j % r)
        }
    };
    let mut nbrs = vec![Vec::new(); nodes.len()];
    nbrs[0] = (0..r).map(|j| id(1, j)).collect();
    nbrs[north] = (0..r).map(|j| id(rows - 2, j)).collect();
    for i in 1..rows - 1 {
        for j in 0..r {
            let mut v = Vec::with_capacity(8);
            for di in [-1i64, 0, 1] {
                for dj in [r - 1, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di) as usize;
                    let n = id(ii, j + dj);
                    if !v.contains(&n) {
                        v.push(n);
                    }
                }
            }
            nbrs[id(i, j)] = v;
        }
    }
    (nodes, nbrs)
}

/// Number of mean-shift steps used to polish each grid maximum.
pub const GRID_REFINE_STEPS: usize = 20;

/// Strict local maxima of the KDE on a grid, each refined by
/// [`GRID_REFINE_STEPS`] mean-shift steps. Refined points within two grid
/// spacings of an earlier one are dropped.
pub fn grid_modes(model: &KdeModel, grid: &GridSpec) -> Result<GridModes> {
    if model.q() != grid.q {
        return Err(if model.q() > 2 {
            Error::DimensionTooLarge { q: model.q() }
        } else {
            Error::WrongDimension {
                expected: grid.q + 1,
                actual: model.dim(),
            }
        });
    }
    let (nodes, nbrs) = grid_graph(grid);
    let dens: Vec<f64> = nodes.par_iter().map(|x| model.density(x)).collect();
    let max = dens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = dens.iter().copied().fold(f64::INFINITY, f64::min);
    let flat = !(max > 0.0) || (max - min) <= 1e-3 * max;
    let candidates: Vec<usize> = (0..nodes.len())
        .filter(|&k| nbrs[k].iter().all(|&m| dens[k] > dens[m]))
        .collect();
    let refined: Vec<UnitVector> = candidates
        .par_iter()
        .map(|&k| {
            let mut y = nodes[k].clone();
            for _ in 0..GRID_REFINE_STEPS {
                match ms_step(model, &y) {
                    Ok(next) => y = next,
                    Err(_) => break,
                }
            }
            y
        })
        .collect();
    let mut modes: Vec<UnitVector> = Vec::new();
    for y in refined {
        if modes
            .iter()
            .all(|m| geodesic_distance(m, &y) > 2.0 * grid.spacing())
        {
            modes.push(y);
        }
    }
    Ok(GridModes { modes, flat })
}

/// `∫_{Ω_q} f dω_q` by product quadrature, `q ∈ {1, 2, 3}`.
///
/// * `q = 1`: trapezoid rule with `n_nodes` points on the circle.
/// * `q = 2`: Gauss–Legendre in `t = cos(colatitude)` with `n_nodes` nodes
///   times a `2 n_nodes`-point trapezoid in longitude.
/// * `q = 3`: Gauss–Legendre in the first polar angle `ψ` with weight
///   `sin² ψ`, times the `q = 2` rule on the remaining 2-sphere.
pub fn sphere_integral<F>(f: F, q: usize, n_nodes: usize) -> Result<f64>
where
    F: Fn(&UnitVector) -> f64 + Sync,
{
    if n_nodes < 2 {
        return Err(Error::InvalidArgument("sphere_integral needs at least 2 nodes".into()));
    }
    let circle = |n: usize| -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let p = 2.0 * PI * k as f64 / n as f64;
                (p.cos(), p.sin())
            })
            .collect()
    };
    match q {
        1 => {
            let pts = circle(n_nodes);
            let s: f64 = pts
                .par_iter()
                .map(|&(c, s)| f(&UnitVector::new(vec![c, s]).expect("unit")))
                .sum();
            Ok(s * 2.0 * PI / n_nodes as f64)
        }
        2 => {
            let (t, w) = gauss_legendre(n_nodes);
            let phi = circle(2 * n_nodes);
            let dphi = 2.0 * PI / (2 * n_nodes) as f64;
            let s: f64 = (0..n_nodes)
                .into_par_iter()
                .map(|i| {
                    let r = (1.0 - t[i] * t[i]).sqrt();
                    let inner: f64 = phi
                        .iter()
                        .map(|&(c, s)| f(&UnitVector::new(vec![r * c, r * s, t[i]]).expect("unit")))
                        .sum();
                    w[i] * inner * dphi
                })
                .sum();
            Ok(s)
        }
        3 => {
            let (u, wu) = gauss_legendre(n_nodes);
            let (t, wt) = gauss_legendre(n_nodes);
            let phi = circle(2 * n_nodes);
            let dphi = 2.0 * PI / (2 * n_nodes) as f64;
            let s: f64 = (0..n_nodes)
                .into_par_iter()
                .map(|a| {
                    let psi = 0.5 * PI * (u[a] + 1.0);
                    let (sp, cp) = psi.sin_cos();
                    let mut inner = 0.0;
                    for i in 0..n_nodes {
                        let r = (1.0 - t[i] * t[i]).sqrt();
                        let ring: f64 = phi
                            .iter()
                            .map(|&(c, s)| {
                                f(&UnitVector::new(vec![cp, sp * r * c, sp * r * s, sp * t[i]])
                                    .expect("unit"))
                            })
                            .sum();
                        inner += wt[i] * ring * dphi;
                    }
                    0.5 * PI * wu[a] * sp * sp * inner
                })
                .sum();
            Ok(s)
        }
        _ => Err(Error::DimensionTooLarge { q }),
    }
}

/// Grid nodes of a [`GridSpec`] as a point set, mainly for plotting.
pub fn grid_points(grid: &GridSpec) -> PointSet {
    PointSet::from_unit_vectors(&grid_graph(grid).0).expect("grid is nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize;
    use crate::kernels::{vmf_log_density, DirectionalKernel};
    use crate::special::surface_area;
    use crate::sampling::{sample_vmf, SeededRng};

    fn single(mu: &UnitVector, h: f64) -> KdeModel {
        KdeModel::new(
            PointSet::from_unit_vectors(&[mu.clone()]).unwrap(),
            h,
            DirectionalKernel::von_mises(),
        )
        .unwrap()
    }

    #[test]
    fn constant_integrates_to_area() {
        for q in 1..=3 {
            let v = sphere_integral(|_| 1.0, q, 24).unwrap();
            assert!((v - surface_area(q)).abs() < 1e-10, "q={q}: {v}");
        }
        assert!(matches!(sphere_integral(|_| 1.0, 4, 8), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn vmf_density_integrates_to_one() {
        let mu = normalize(&[0.3, -0.2, 0.9]).unwrap();
        let v = sphere_integral(|x| vmf_log_density(x, &mu, 20.0).unwrap().exp(), 2, 80).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
        let mu4 = normalize(&[0.3, -0.2, 0.9, 0.1]).unwrap();
        let v = sphere_integral(|x| vmf_log_density(x, &mu4, 5.0).unwrap().exp(), 3, 48).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fd_gradient_flat_for_huge_bandwidth() {
        let m = single(&UnitVector::basis(3, 0), 1e3);
        let x = [0.0, 1.0, 0.0];
        let g = fd_gradient(&m, &x, 1e-5).unwrap();
        let f = m.density_alt(&x).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-5 * f));
        assert!(fd_gradient(&m, &[0.0, 1.0, 0.0], 1e-2).is_err());
    }

    #[test]
    fn fd_gradient_matches_tilde_gradient() {
        let data = sample_vmf(&UnitVector::basis(3, 1), 3.0, 40, &mut SeededRng::new(1)).unwrap();
        let m = KdeModel::new(data, 0.4, DirectionalKernel::von_mises()).unwrap();
        let x = normalize(&[0.2, 0.8, -0.3]).unwrap();
        let fd = fd_gradient(&m, x.as_slice(), 1e-4).unwrap();
        let exact = m.total_gradient_tilde(x.as_slice()).unwrap();
        let scale = exact.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (a, b) in fd.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
        let h = fd_hessian(&m, x.as_slice(), 1e-4).unwrap();
        assert!(h.max_abs_diff(&h.transpose()) < 1e-4 * h.max_abs());
    }

    #[test]
    fn grid_requires_small_dimension() {
        assert!(matches!(GridSpec::new(3, 32), Err(Error::DimensionTooLarge { .. })));
        assert!(GridSpec::new(2, 8).is_err());
        let m4 = single(&UnitVector::basis(4, 0), 0.5);
        let g = GridSpec::new(2, 32).unwrap();
        assert!(matches!(grid_modes(&m4, &g), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn single_vmf_has_one_grid_mode() {
        let mu = normalize(&[0.4, -0.5, 0.3]).unwrap();
        let m = single(&mu, 0.5);
        let g = GridSpec::new(2, 64).unwrap();
        let out = grid_modes(&m, &g).unwrap();
        assert!(!out.flat);
        assert_eq!(out.modes.len(), 1);
        assert!(geodesic_distance(&out.modes[0], &mu) < g.spacing());

        let circ = single(&angle_to_unit(1.0), 0.4);
        let out = grid_modes(&circ, &GridSpec::new(1, 256).unwrap()).unwrap();
        assert_eq!(out.modes.len(), 1);
        assert!(geodesic_distance(&out.modes[0], &angle_to_unit(1.0)) < 1e-10);
    }

    #[test]
    fn huge_bandwidth_is_flagged_flat() {
        let m = single(&UnitVector::basis(3, 2), 100.0);
        let out = grid_modes(&m, &GridSpec::new(2, 32).unwrap()).unwrap();
        assert!(out.flat);
        assert!(out.modes.len() <= 1);
    }

    #[test]
    fn pole_neighborhoods() {
        let g = GridSpec::new(2, 16).unwrap();
        let (nodes, nbrs) = grid_graph(&g);
        assert_eq!(nodes.len(), 2 + 7 * 16);
        assert_eq!(nbrs[0].len(), 16);
        assert!(nbrs[1..nodes.len() - 1].iter().all(|v| v.len() == 8 || v.len() == 6));
    }
}
