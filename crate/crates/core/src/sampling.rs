//! Seeded random generation on spheres.
//!
//! von Mises–Fisher draws use plain rejection from the uniform distribution,
//! accepting a proposal `z` with probability `exp(ν(μᵀz − 1))`. This is slow
//! for large `ν`, so the analytic acceptance rate is checked up front.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{angle_to_unit, lonlat_to_unit, norm, PointSet, UnitVector};
use crate::kernels::vmf_log_normalizer;
use crate::special::{ln_surface_area, log_bessel_i};

/// Acceptance rates below this make rejection sampling impractical.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-6;

/// ChaCha20 generator with a recorded seed.
///
/// Independent streams for parallel work come from [`SeededRng::stream`],
/// which keeps the key and switches the ChaCha stream id.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A generator for stream `id` of the same seed, positioned at its start.
    pub fn stream(&self, id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(id);
        Self {
            seed: self.seed,
            inner,
        }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn uniform_point<R: Rng + ?Sized>(dim: usize, rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 1e-12 {
            out.iter_mut().for_each(|v| *v /= n);
            debug_assert_eq!(out.len(), dim);
            return;
        }
    }
}

/// `n` i.i.d. uniform points on `Ω_q` (normalized Gaussians).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(q: usize, n: usize, rng: &mut R) -> PointSet {
    let dim = q + 1;
    let mut coords = vec![0.0; n * dim];
    for row in coords.chunks_mut(dim) {
        uniform_point(dim, rng, row);
    }
    PointSet::new(dim, coords).expect("rows are unit vectors")
}

/// Expected acceptance probability of the uniform-proposal sampler,
/// `e^{−ν} / (ω_q C_q(ν))`.
pub fn vmf_acceptance_rate(q: usize, nu: f64) -> f64 {
    (-nu - ln_surface_area(q) - vmf_log_normalizer(q, nu)).exp()
}

fn check_vmf(q: usize, nu: f64) -> Result<()> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "concentration must be finite and nonnegative, got {nu}"
        )));
    }
    let rate = vmf_acceptance_rate(q, nu);
    if rate < MIN_ACCEPTANCE_RATE {
        return Err(Error::RejectionBudgetExceeded { nu, rate });
    }
    Ok(())
}

fn vmf_point<R: Rng + ?Sized>(mu: &[f64], nu: f64, rng: &mut R, out: &mut [f64]) {
    loop {
        uniform_point(mu.len(), rng, out);
        let c: f64 = out.iter().zip(mu).map(|(a, b)| a * b).sum();
        let u: f64 = rng.random();
        if u.ln() <= nu * (c - 1.0) {
            return;
        }
    }
}

/// `n` i.i.d. draws from vMF(μ, ν).
pub fn sample_vmf<R: Rng + ?Sized>(
    mu: &UnitVector,
    nu: f64,
    n: usize,
    rng: &mut R,
) -> Result<PointSet> {
    check_vmf(mu.q(), nu)?;
    let dim = mu.dim();
    let mut coords = vec![0.0; n * dim];
    for row in coords.chunks_mut(dim) {
        vmf_point(mu.as_slice(), nu, rng, row);
    }
    PointSet::new(dim, coords)
}

/// One vMF component of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub mu: UnitVector,
    pub nu: f64,
    pub weight: f64,
}

/// A finite mixture of vMF densities on a common sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("mixture has no components".into()))?;
        let dim = first.mu.dim();
        let mut total = 0.0;
        for c in &components {
            if c.mu.dim() != dim {
                return Err(Error::WrongDimension {
                    expected: dim,
                    actual: c.mu.dim(),
                });
            }
            if !(c.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "negative mixture weight {}",
                    c.weight
                )));
            }
            check_vmf(dim - 1, c.nu)?;
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self { components })
    }

    /// A single vMF(μ, ν).
    pub fn single(mu: UnitVector, nu: f64) -> Result<Self> {
        Self::new(vec![MixtureComponent { mu, nu, weight: 1.0 }])
    }

    /// Three vMF components on `Ω_2` with weights 0.3/0.3/0.4, concentrations
    /// 8/8/5 and centers at (lon, lat) = (−120°, −45°), (0°, 60°), (150°, 0°).
    pub fn three_mode() -> Self {
        let c = |lon, lat, nu, weight| MixtureComponent {
            mu: lonlat_to_unit(lon, lat).expect("valid latitude"),
            nu,
            weight,
        };
        Self::new(vec![
            c(-120.0, -45.0, 8.0, 0.3),
            c(0.0, 60.0, 8.0, 0.3),
            c(150.0, 0.0, 5.0, 0.4),
        ])
        .expect("valid preset")
    }

    /// Four equally weighted vMF(eᵢ, ν) components, `i = 1..4`, on `Ω_q`.
    pub fn hyperq(q: usize, nu: f64) -> Result<Self> {
        if q < 3 {
            return Err(Error::InvalidArgument(format!(
                "the four-component scenario needs q >= 3, got {q}"
            )));
        }
        Self::new(
            (0..4)
                .map(|i| MixtureComponent {
                    mu: UnitVector::basis(q + 1, i),
                    nu,
                    weight: 0.25,
                })
                .collect(),
        )
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].mu.dim()
    }

    pub fn q(&self) -> usize {
        self.dim() - 1
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: &UnitVector) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let ln = vmf_log_normalizer(self.q(), c.nu) + c.nu * c.mu.dot(x);
                c.weight * ln.exp()
            })
            .sum()
    }
}

/// `n` draws from a mixture, with the index of the generating component.
pub fn sample_mixture<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    n: usize,
    rng: &mut R,
) -> (PointSet, Vec<usize>) {
    let dim = spec.dim();
    let mut coords = vec![0.0; n * dim];
    let mut labels = Vec::with_capacity(n);
    let last = spec.components.len() - 1;
    for row in coords.chunks_mut(dim) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = last;
        for (i, c) in spec.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                k = i;
                break;
            }
        }
        let c = &spec.components[k];
        vmf_point(c.mu.as_slice(), c.nu, rng, row);
        labels.push(k);
    }
    (
        PointSet::new(dim, coords).expect("rows are unit vectors"),
        labels,
    )
}

/// Concentration of the von Mises component of the circular test density.
pub const F1_VM_NU: f64 = 6.0;

/// Samples the circular density `f₁`: an equal mixture of a Laplace(0, 1)
/// truncated to `[−π, π]` (label 0) and a von Mises with mean `π/2` and
/// concentration 6 (label 1). Angles lie in `[−π, π)`.
pub fn sample_circular_f1<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<usize>) {
    let lo = 0.5 * (-PI).exp();
    let hi = 1.0 - lo;
    let mut angles = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = if rng.random::<f64>() < 0.5 {
            labels.push(0);
            // inverse CDF of the Laplace restricted to [F(−π), F(π)]
            let u = lo + (hi - lo) * rng.random::<f64>();
            if u < 0.5 {
                (2.0 * u).ln()
            } else {
                -(2.0 * (1.0 - u)).ln()
            }
        } else {
            labels.push(1);
            loop {
                let t = PI * (2.0 * rng.random::<f64>() - 1.0);
                let u: f64 = rng.random();
                if u.ln() <= F1_VM_NU * ((t - 0.5 * PI).cos() - 1.0) {
                    break t;
                }
            }
        };
        angles.push(if theta >= PI { theta - 2.0 * PI } else { theta });
    }
    (angles, labels)
}

/// Analytic density of `f₁` with respect to arc length.
pub fn circular_f1_density(theta: f64) -> f64 {
    let laplace = if theta.abs() <= PI {
        (-theta.abs()).exp() / (2.0 * (1.0 - (-PI).exp()))
    } else {
        0.0
    };
    let ln_vm = F1_VM_NU * (theta - 0.5 * PI).cos() - (2.0 * PI).ln() - log_bessel_i(0.0, F1_VM_NU);
    0.5 * laplace + 0.5 * ln_vm.exp()
}

/// Embeds angles as `(cos θ, sin θ) ∈ Ω_1`.
pub fn embed_angles(angles: &[f64]) -> PointSet {
    let pts: Vec<UnitVector> = angles.iter().map(|&t| angle_to_unit(t)).collect();
    if pts.is_empty() {
        return PointSet::empty(2);
    }
    PointSet::from_unit_vectors(&pts).expect("all points in R^2")
}
