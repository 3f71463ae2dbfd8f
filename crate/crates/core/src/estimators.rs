//! The directional KDE and its derivative estimators.
//!
//! Two algebraic forms of the estimator coincide on the sphere:
//!
//! * `f̂(x) = c/n Σ L((1 − xᵀXᵢ)/h²)` (the "hat" form), and
//! * `f̃(x) = c/n Σ L(½‖(x − Xᵢ)/h‖²)` (the "tilde" form).
//!
//! Their ambient gradients differ by a radial term, so their Riemannian
//! gradients and Hessians agree. Both routes are exposed so they can be
//! checked against each other.
//!
//! Every kernel-weighted sum is accumulated relative to the largest
//! log-weight and rescaled once at the end. With the von Mises kernel and
//! `h = 0.1` individual weights reach `e^{-200}`; the rescaling keeps
//! directions exact, and values that truly underflow report as zero.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dot, project_raw, tangent_basis, PointSet, TangentVector, UnitVector};
use crate::kernels::{normalizing_constant, DirectionalKernel, NormalizingConstant};
use crate::linalg::{symmetric_eigen, Matrix};

/// Immutable bundle of data, bandwidth and kernel.
#[derive(Debug, Clone)]
pub struct KdeModel {
    data: PointSet,
    h: f64,
    kernel: DirectionalKernel,
    norm: NormalizingConstant,
}

/// Riemannian Hessian at a point with its tangent-space eigen-decomposition.
#[derive(Debug, Clone)]
pub struct HessianReport {
    pub point: UnitVector,
    pub matrix: Matrix,
    /// Eigenvalues of `Bᵀ H B`, descending.
    pub tangent_eigenvalues: Vec<f64>,
    pub tangent_eigenvectors: Vec<TangentVector>,
}

/// A vector known up to the factor `exp(ln_scale)`.
#[derive(Debug, Clone)]
pub struct ScaledVector {
    pub direction: Vec<f64>,
    pub ln_scale: f64,
}

impl ScaledVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let s = self.ln_scale.exp();
        self.direction.iter().map(|v| v * s).collect()
    }
}

impl KdeModel {
    pub fn new(data: PointSet, h: f64, kernel: DirectionalKernel) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptySet);
        }
        let norm = normalizing_constant(&kernel, h, data.q())?;
        Ok(Self {
            data,
            h,
            kernel,
            norm,
        })
    }

    /// Reuses this model's bandwidth, kernel and normalizing constant with
    /// different data of the same dimension.
    pub fn with_data(&self, data: PointSet) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptySet);
        }
        if data.dim() != self.data.dim() {
            return Err(Error::WrongDimension {
                expected: self.data.dim(),
                actual: data.dim(),
            });
        }
        Ok(Self {
            data,
            h: self.h,
            kernel: self.kernel.clone(),
            norm: self.norm,
        })
    }

    pub fn data(&self) -> &PointSet {
        &self.data
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &DirectionalKernel {
        &self.kernel
    }

    pub fn normalizing_constant(&self) -> &NormalizingConstant {
        &self.norm
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn q(&self) -> usize {
        self.data.q()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::WrongDimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `ln(c/n)`.
    fn ln_prefactor(&self) -> f64 {
        self.norm.ln_value - (self.n() as f64).ln()
    }

    fn hat_arg(&self, x: &[f64], xi: &[f64]) -> f64 {
        (1.0 - dot(x, xi)) / (self.h * self.h)
    }

    fn tilde_arg(&self, x: &[f64], xi: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * d2 / (self.h * self.h)
    }

    fn scaled_profile_sum(&self, args: impl Iterator<Item = f64>) -> f64 {
        let logs: Vec<f64> = args.map(|r| self.kernel.ln_value(r)).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }

    /// `ln f̂(x)`; `-inf` when every kernel weight vanishes.
    pub fn ln_density(&self, x: &UnitVector) -> f64 {
        let xs = x.as_slice();
        self.ln_prefactor() + self.scaled_profile_sum(self.data.rows().map(|xi| self.hat_arg(xs, xi)))
    }

    /// `f̂(x) = c/n Σ L((1 − xᵀXᵢ)/h²)`; zero when the value underflows.
    pub fn density(&self, x: &UnitVector) -> f64 {
        self.ln_density(x).exp()
    }

    /// `f̃(x) = c/n Σ L(½‖(x − Xᵢ)/h‖²)` for any nonzero ambient `x`.
    /// Equal to [`density`](Self::density) on the sphere only.
    pub fn density_alt(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroVector { norm: 0.0 });
        }
        let s = self.scaled_profile_sum(self.data.rows().map(|xi| self.tilde_arg(x, xi)));
        Ok((self.ln_prefactor() + s).exp())
    }

    /// Densities at many points, evaluated in parallel, order preserved.
    pub fn densities(&self, points: &PointSet) -> Vec<f64> {
        (0..points.len())
            .into_par_iter()
            .map(|i| self.density(&points.point(i)))
            .collect()
    }

    /// `Σ Xᵢ L′((1 − xᵀXᵢ)/h²)` as a scaled vector.
    pub(crate) fn deriv_weighted_sum(&self, x: &[f64]) -> ScaledVector {
        let logs: Vec<_> = self
            .data
            .rows()
            .map(|xi| self.kernel.signed_ln_deriv(self.hat_arg(x, xi)))
            .collect();
        let m = logs
            .iter()
            .map(|l| l.ln_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut direction = vec![0.0; self.dim()];
        if m == f64::NEG_INFINITY {
            return ScaledVector {
                direction,
                ln_scale: 0.0,
            };
        }
        for (xi, l) in self.data.rows().zip(&logs) {
            let w = l.sign * (l.ln_abs - m).exp();
            for (d, v) in direction.iter_mut().zip(xi) {
                *d += w * v;
            }
        }
        ScaledVector {
            direction,
            ln_scale: m,
        }
    }

    /// `∇f̂(x) = −c/(nh²) Σ Xᵢ L′((1 − xᵀXᵢ)/h²)` as a scaled vector.
    pub fn total_gradient_hat_scaled(&self, x: &UnitVector) -> ScaledVector {
        let s = self.deriv_weighted_sum(x.as_slice());
        ScaledVector {
            direction: s.direction.iter().map(|v| -v).collect(),
            ln_scale: s.ln_scale + self.ln_prefactor() - 2.0 * self.h.ln(),
        }
    }

    /// Total (ambient) gradient of the hat form.
    pub fn total_gradient_hat(&self, x: &UnitVector) -> Vec<f64> {
        self.total_gradient_hat_scaled(x).to_vec()
    }

    /// `∇f̃(x) = c/(nh²) Σ (x − Xᵢ) L′(½‖(x − Xᵢ)/h‖²)` at any ambient `x`.
    pub fn total_gradient_tilde(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let logs: Vec<_> = self
            .data
            .rows()
            .map(|xi| self.kernel.signed_ln_deriv(self.tilde_arg(x, xi)))
            .collect();
        let m = logs
            .iter()
            .map(|l| l.ln_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = vec![0.0; self.dim()];
        if m == f64::NEG_INFINITY {
            return Ok(out);
        }
        for (xi, l) in self.data.rows().zip(&logs) {
            let w = l.sign * (l.ln_abs - m).exp();
            for ((o, a), b) in out.iter_mut().zip(x).zip(xi) {
                *o += w * (a - b);
            }
        }
        let s = (m + self.ln_prefactor() - 2.0 * self.h.ln()).exp();
        out.iter_mut().for_each(|v| *v *= s);
        Ok(out)
    }

    /// `grad f̂(x) = (I − xxᵀ) ∇f̂(x)`.
    pub fn riemannian_gradient(&self, x: &UnitVector) -> TangentVector {
        let g = self.total_gradient_hat(x);
        TangentVector::new(x.clone(), project_raw(x.as_slice(), &g))
            .expect("projection is tangent")
    }

    /// Signed radial component `xᵀ ∇f̂(x)`.
    pub fn radial_gradient_magnitude(&self, x: &UnitVector) -> f64 {
        dot(x.as_slice(), &self.total_gradient_hat(x))
    }

    /// Riemannian Hessian of the hat form,
    /// `P [c/(nh⁴) Σ XᵢXᵢᵀ L″ + c/(nh²) Σ xᵀXᵢ L′ I] P` with `P = I − xxᵀ`,
    /// and its eigenstructure in the tangent space.
    pub fn riemannian_hessian(&self, x: &UnitVector) -> Result<HessianReport> {
        if !self.kernel.is_c2() {
            return Err(Error::KernelNotC2 {
                name: self.kernel.name().to_string(),
            });
        }
        let xs = x.as_slice();
        let dim = self.dim();
        let ln_h2 = 2.0 * self.h.ln();
        // per-point (log-magnitude, sign) for the L″ and L′ terms
        let mut terms = Vec::with_capacity(self.n());
        let mut m = f64::NEG_INFINITY;
        for xi in self.data.rows() {
            let r = self.hat_arg(xs, xi);
            let d2 = self.kernel.signed_ln_deriv2(r).expect("checked C2");
            let d1 = self.kernel.signed_ln_deriv(r);
            let c = dot(xs, xi);
            let outer = (d2.ln_abs - ln_h2, d2.sign);
            let diag = (d1.ln_abs + c.abs().ln(), d1.sign * c.signum());
            m = m.max(outer.0).max(diag.0);
            terms.push((outer, diag));
        }
        let mut a = Matrix::zeros(dim);
        if m > f64::NEG_INFINITY {
            let mut diag_sum = 0.0;
            for (xi, (outer, diag)) in self.data.rows().zip(&terms) {
                a.add_outer(outer.1 * (outer.0 - m).exp(), xi, xi);
                diag_sum += diag.1 * (diag.0 - m).exp();
            }
            for i in 0..dim {
                a[(i, i)] += diag_sum;
            }
            a.scale((m + self.ln_prefactor() - ln_h2).exp());
        }
        Ok(self.hessian_report(x, a.sandwich_projector(xs)))
    }

    /// Riemannian Hessian computed from the tilde form,
    /// `P [∇∇f̃(x) − xᵀ∇f̃(x) I] P`. Agrees with
    /// [`riemannian_hessian`](Self::riemannian_hessian) on the sphere.
    pub fn riemannian_hessian_tilde(&self, x: &UnitVector) -> Result<Matrix> {
        if !self.kernel.is_c2() {
            return Err(Error::KernelNotC2 {
                name: self.kernel.name().to_string(),
            });
        }
        let xs = x.as_slice();
        let dim = self.dim();
        let h2 = self.h * self.h;
        let mut a = Matrix::zeros(dim);
        let mut diag = 0.0;
        let mut radial = 0.0;
        let args: Vec<f64> = self.data.rows().map(|xi| self.tilde_arg(xs, xi)).collect();
        let m = args
            .iter()
            .map(|&r| {
                let d1 = self.kernel.signed_ln_deriv(r).ln_abs;
                let d2 = self.kernel.signed_ln_deriv2(r).expect("checked C2").ln_abs - h2.ln();
                d1.max(d2)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if m > f64::NEG_INFINITY {
            for (xi, &r) in self.data.rows().zip(&args) {
                let l1 = self.kernel.signed_ln_deriv(r);
                let l2 = self.kernel.signed_ln_deriv2(r).expect("checked C2");
                let w1 = l1.sign * (l1.ln_abs - m).exp();
                let w2 = l2.sign * (l2.ln_abs - h2.ln() - m).exp();
                let d: Vec<f64> = xs.iter().zip(xi).map(|(a, b)| a - b).collect();
                a.add_outer(w2, &d, &d);
                diag += w1;
                radial += dot(xs, &d) * w1;
            }
            for i in 0..dim {
                a[(i, i)] += diag - radial;
            }
            a.scale((m + self.ln_prefactor() - h2.ln()).exp());
        }
        Ok(symmetrize(a.sandwich_projector(xs)))
    }

    fn hessian_report(&self, x: &UnitVector, matrix: Matrix) -> HessianReport {
        let matrix = symmetrize(matrix);
        let basis = tangent_basis(x);
        let cols = basis.columns();
        let q = cols.len();
        let mut reduced = Matrix::zeros(q);
        let hb: Vec<Vec<f64>> = cols.iter().map(|c| matrix.mul_vec(c)).collect();
        for i in 0..q {
            for j in 0..q {
                reduced[(i, j)] = dot(&cols[i], &hb[j]);
            }
        }
        let eig = symmetric_eigen(&symmetrize(reduced), 1e-12, 50);
        let tangent_eigenvectors = eig
            .vectors
            .iter()
            .map(|v| {
                let amb = basis.embed(v);
                TangentVector::new(x.clone(), project_raw(x.as_slice(), &amb))
                    .expect("basis vectors are tangent")
            })
            .collect();
        HessianReport {
            point: x.clone(),
            matrix,
            tangent_eigenvalues: eig.values,
            tangent_eigenvectors,
        }
    }
}

fn symmetrize(m: Matrix) -> Matrix {
    let t = m.transpose();
    let n = m.size();
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = 0.5 * (m[(i, j)] + t[(i, j)]);
        }
    }
    out
}
