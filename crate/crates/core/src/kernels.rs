//! Directional kernel profiles and the KDE normalizing constant.
//!
//! A directional kernel is a profile `L: [0, ∞) → [0, ∞)` applied to
//! `(1 − xᵀy)/h²`. Profiles expose `L`, `L′` and (optionally) `L″` in closed
//! form together with log-magnitude variants, so weighted sums can be
//! rescaled before exponentiation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::UnitVector;
use crate::quadrature;
use crate::special::{ln_gamma, ln_surface_area, log_bessel_i};

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    VonMises,
    Rational {
        power: f64,
    },
    Custom {
        value: ProfileFn,
        deriv: ProfileFn,
        deriv2: Option<ProfileFn>,
    },
}

/// A kernel profile `L` with its first two derivatives.
///
/// Construction checks the profile on the grid `r ∈ {0, 0.1, …, 20}`: `L(0)`
/// finite, `L >= 0`, `L` non-increasing, `L′ <= 0` and, when `L″` is known,
/// `L″ >= 0`. These are the conditions under which mean-shift iterations
/// ascend the estimated density; they are spot checks, not proofs.
#[derive(Clone)]
pub struct DirectionalKernel {
    name: String,
    profile: Profile,
}

impl fmt::Debug for DirectionalKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirectionalKernel")
            .field("name", &self.name)
            .finish()
    }
}

/// Sign and natural-log magnitude of a real number, `ln|v|` with `sign(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    pub fn of(v: f64) -> Self {
        Self {
            ln_abs: v.abs().ln(),
            sign: if v < 0.0 { -1.0 } else { 1.0 },
        }
    }
}

impl DirectionalKernel {
    /// `L(r) = e^{−r}`.
    pub fn von_mises() -> Self {
        Self {
            name: "vonmises".into(),
            profile: Profile::VonMises,
        }
    }

    /// `L(r) = (1 + r)^{−p}` for `p > 0`.
    pub fn rational(power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidKernel {
                name: "rational".into(),
                reason: format!("power must be positive, got {power}"),
            });
        }
        let k = Self {
            name: format!("rational({power})"),
            profile: Profile::Rational { power },
        };
        k.validate()?;
        Ok(k)
    }

    /// A user-supplied profile; validated on construction.
    pub fn custom<V, D>(
        name: impl Into<String>,
        value: V,
        deriv: D,
        deriv2: Option<ProfileFn>,
    ) -> Result<Self>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let k = Self {
            name: name.into(),
            profile: Profile::Custom {
                value: Arc::new(value),
                deriv: Arc::new(deriv),
                deriv2,
            },
        };
        k.validate()?;
        Ok(k)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_von_mises(&self) -> bool {
        matches!(self.profile, Profile::VonMises)
    }

    pub fn is_c2(&self) -> bool {
        !matches!(
            self.profile,
            Profile::Custom { deriv2: None, .. }
        )
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::VonMises => (-r).exp(),
            Profile::Rational { power } => (1.0 + r).powf(-power),
            Profile::Custom { value, .. } => value(r),
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::VonMises => -(-r).exp(),
            Profile::Rational { power } => -power * (1.0 + r).powf(-power - 1.0),
            Profile::Custom { deriv, .. } => deriv(r),
        }
    }

    pub fn deriv2(&self, r: f64) -> Option<f64> {
        match &self.profile {
            Profile::VonMises => Some((-r).exp()),
            Profile::Rational { power } => {
                Some(power * (power + 1.0) * (1.0 + r).powf(-power - 2.0))
            }
            Profile::Custom { deriv2, .. } => deriv2.as_ref().map(|f| f(r)),
        }
    }

    /// `ln L(r)`.
    pub fn ln_value(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::VonMises => -r,
            Profile::Rational { power } => -power * r.ln_1p(),
            Profile::Custom { value, .. } => value(r).ln(),
        }
    }

    /// `L′(r)` as sign and log-magnitude.
    pub fn signed_ln_deriv(&self, r: f64) -> SignedLog {
        match &self.profile {
            Profile::VonMises => SignedLog {
                ln_abs: -r,
                sign: -1.0,
            },
            Profile::Rational { power } => SignedLog {
                ln_abs: power.ln() - (power + 1.0) * r.ln_1p(),
                sign: -1.0,
            },
            Profile::Custom { deriv, .. } => SignedLog::of(deriv(r)),
        }
    }

    /// `L″(r)` as sign and log-magnitude.
    pub fn signed_ln_deriv2(&self, r: f64) -> Option<SignedLog> {
        match &self.profile {
            Profile::VonMises => Some(SignedLog {
                ln_abs: -r,
                sign: 1.0,
            }),
            Profile::Rational { power } => Some(SignedLog {
                ln_abs: (power * (power + 1.0)).ln() - (power + 2.0) * r.ln_1p(),
                sign: 1.0,
            }),
            Profile::Custom { deriv2, .. } => deriv2.as_ref().map(|f| SignedLog::of(f(r))),
        }
    }

    /// Spot-checks the profile conditions on `r ∈ {0, 0.1, …, 20}`.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidKernel {
            name: self.name.clone(),
            reason,
        };
        let l0 = self.value(0.0);
        if !l0.is_finite() {
            return Err(fail(format!("L(0) = {l0} is not finite")));
        }
        if !(l0 > 0.0) {
            return Err(fail(format!("L(0) = {l0} must be positive")));
        }
        let slack = 1e-12 * l0;
        let mut prev = l0;
        for i in 0..=200 {
            let r = i as f64 * 0.1;
            let v = self.value(r);
            let d = self.deriv(r);
            if !v.is_finite() || v < 0.0 {
                return Err(fail(format!("L({r:.1}) = {v} is not a finite nonnegative value")));
            }
            if v > prev + slack {
                return Err(fail(format!("L increases at r = {r:.1}")));
            }
            if !d.is_finite() || d > slack {
                return Err(fail(format!("L'({r:.1}) = {d} is positive")));
            }
            if let Some(d2) = self.deriv2(r) {
                if !d2.is_finite() || d2 < -slack {
                    return Err(fail(format!("L''({r:.1}) = {d2}; profile is not convex")));
                }
            }
            prev = v;
        }
        Ok(())
    }
}

/// How a [`NormalizingConstant`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMethod {
    ClosedForm,
    Quadrature,
}

/// `c_{h,q}(L)`, kept in log form so that small bandwidths in high
/// dimension do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizingConstant {
    pub ln_value: f64,
    pub h: f64,
    pub q: usize,
    pub method: NormalizationMethod,
}

impl NormalizingConstant {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

fn check_hq(h: f64, q: usize) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    if q < 1 {
        return Err(Error::InvalidArgument("sphere dimension q must be >= 1".into()));
    }
    Ok(())
}

/// `λ_{h,q}(L) = ω_{q−1} ∫_0^{2/h²} L(r) r^{q/2−1} (2 − rh²)^{q/2−1} dr`.
///
/// The interval is split at `1/h²`; the lower half is integrated in
/// `s = √r` and the upper half in `u = √(2/h² − r)`, which turns both
/// endpoint factors into smooth polynomials in the new variable (the
/// singularities at `q = 1` included).
pub fn lambda_hq(kernel: &DirectionalKernel, h: f64, q: usize) -> Result<f64> {
    check_hq(h, q)?;
    let qf = q as f64;
    let e = qf / 2.0 - 1.0;
    let h2 = h * h;
    let big_r = 2.0 / h2;
    let s_max = 1.0 / h;
    let lower = |s: f64| {
        let r = s * s;
        2.0 * s.powi(q as i32 - 1) * kernel.value(r) * (2.0 - r * h2).powf(e)
    };
    let upper = |u: f64| {
        let r = (big_r - u * u).max(0.0);
        2.0 * h.powi(q as i32 - 2) * u.powi(q as i32 - 1) * r.powf(e) * kernel.value(r)
    };
    let a = quadrature::integrate(lower, 0.0, s_max, 1e-13, 0.0, 4000, 1e-9)?;
    let b = quadrature::integrate(upper, 0.0, s_max, 1e-13, 1e-16 * a.value.abs(), 4000, 1e-9)?;
    Ok(ln_surface_area(q - 1).exp() * (a.value + b.value))
}

/// Small-bandwidth limit `λ_q(L) = 2^{q/2−1} ω_{q−1} ∫_0^∞ L(r) r^{q/2−1} dr`.
pub fn lambda_q(kernel: &DirectionalKernel, q: usize) -> Result<f64> {
    check_hq(1.0, q)?;
    let qf = q as f64;
    // r = s², truncated where the profile has decayed below 1e-300 relative
    let mut upper = 1.0;
    while kernel.value(upper * upper) > 1e-300 * kernel.value(0.0) && upper < 1e8 {
        upper *= 2.0;
    }
    let f = |s: f64| 2.0 * s.powi(q as i32 - 1) * kernel.value(s * s);
    let i = quadrature::integrate(f, 0.0, upper, 1e-13, 0.0, 4000, 1e-9)?;
    Ok(2.0_f64.powf(qf / 2.0 - 1.0) * ln_surface_area(q - 1).exp() * i.value)
}

/// `c_{h,q}(L) = (h^q λ_{h,q}(L))⁻¹` by quadrature.
pub fn normalizing_constant_quadrature(
    kernel: &DirectionalKernel,
    h: f64,
    q: usize,
) -> Result<NormalizingConstant> {
    let lambda = lambda_hq(kernel, h, q)?;
    Ok(NormalizingConstant {
        ln_value: -(q as f64) * h.ln() - lambda.ln(),
        h,
        q,
        method: NormalizationMethod::Quadrature,
    })
}

/// Closed form for the von Mises kernel: `c_{h,q} = C_q(1/h²) e^{1/h²}`.
pub fn von_mises_normalizing_constant(h: f64, q: usize) -> Result<NormalizingConstant> {
    check_hq(h, q)?;
    let nu = 1.0 / (h * h);
    Ok(NormalizingConstant {
        ln_value: vmf_log_normalizer(q, nu) + nu,
        h,
        q,
        method: NormalizationMethod::ClosedForm,
    })
}

/// Closed form when available, quadrature otherwise.
pub fn normalizing_constant(
    kernel: &DirectionalKernel,
    h: f64,
    q: usize,
) -> Result<NormalizingConstant> {
    if kernel.is_von_mises() {
        von_mises_normalizing_constant(h, q)
    } else {
        normalizing_constant_quadrature(kernel, h, q)
    }
}

/// `ln C_q(ν)` with `C_q(ν) = ν^{(q−1)/2} / ((2π)^{(q+1)/2} I_{(q−1)/2}(ν))`;
/// the `ν → 0` limit is `−ln ω_q`.
pub fn vmf_log_normalizer(q: usize, nu: f64) -> f64 {
    let qf = q as f64;
    let alpha = (qf - 1.0) / 2.0;
    if nu == 0.0 {
        return -ln_surface_area(q);
    }
    if nu < 1e-8 {
        // I_α(ν) ≈ (ν/2)^α / Γ(α+1) makes the ratio ν-independent to O(ν²)
        return -((qf + 1.0) / 2.0) * (2.0 * PI).ln() + alpha * 2.0_f64.ln() + ln_gamma(alpha + 1.0);
    }
    alpha * nu.ln() - ((qf + 1.0) / 2.0) * (2.0 * PI).ln() - log_bessel_i(alpha, nu)
}

/// `ln f_vMF(x; μ, ν) = ln C_q(ν) + ν μᵀx`.
pub fn vmf_log_density(x: &UnitVector, mu: &UnitVector, nu: f64) -> Result<f64> {
    if x.dim() != mu.dim() {
        return Err(Error::WrongDimension {
            expected: mu.dim(),
            actual: x.dim(),
        });
    }
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!("concentration must be >= 0, got {nu}")));
    }
    Ok(vmf_log_normalizer(x.q(), nu) + nu * mu.dot(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize;

    #[test]
    fn von_mises_profile_values() {
        let k = DirectionalKernel::von_mises();
        assert_eq!(k.value(0.0), 1.0);
        assert_eq!(k.deriv(0.0), -1.0);
        assert!((k.value(1.0) - 0.36788).abs() < 1e-5);
        assert_eq!(k.deriv2(1.0), Some((-1.0_f64).exp()));
        k.validate().unwrap();
    }

    #[test]
    fn rejects_unbounded_and_increasing_profiles() {
        let unbounded = DirectionalKernel::custom(
            "inverse-sqrt",
            |r: f64| r.powf(-0.5),
            |r: f64| -0.5 * r.powf(-1.5),
            None,
        );
        assert!(matches!(unbounded, Err(Error::InvalidKernel { .. })));
        let increasing = DirectionalKernel::custom("grow", |r: f64| 1.0 + r, |_| 1.0, None);
        assert!(matches!(increasing, Err(Error::InvalidKernel { .. })));
        let concave = DirectionalKernel::custom(
            "concave",
            |r: f64| (1.0 - r * r / 800.0).max(0.0),
            |r: f64| -r / 400.0,
            Some(Arc::new(|_| -1.0 / 400.0)),
        );
        assert!(matches!(concave, Err(Error::InvalidKernel { .. })));
    }

    #[test]
    fn kernel_without_second_derivative_is_not_c2() {
        let k = DirectionalKernel::custom("exp-noc2", |r: f64| (-r).exp(), |r: f64| -(-r).exp(), None)
            .unwrap();
        assert!(!k.is_c2());
        assert!(DirectionalKernel::von_mises().is_c2());
    }

    #[test]
    fn log_forms_match_direct_forms() {
        for k in [DirectionalKernel::von_mises(), DirectionalKernel::rational(3.0).unwrap()] {
            for r in [0.0, 0.3, 2.0, 17.5] {
                assert!((k.ln_value(r) - k.value(r).ln()).abs() < 1e-13);
                let d = k.signed_ln_deriv(r);
                assert!((d.sign * d.ln_abs.exp() - k.deriv(r)).abs() < 1e-14);
                let d2 = k.signed_ln_deriv2(r).unwrap();
                assert!((d2.sign * d2.ln_abs.exp() - k.deriv2(r).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lambda_small_bandwidth_limit_von_mises_q2() {
        let k = DirectionalKernel::von_mises();
        let limit = lambda_q(&k, 2).unwrap();
        assert!((limit - 2.0 * PI).abs() < 1e-10);
        assert!((limit - 6.28319).abs() < 1e-5);
        let gap = |h: f64| (lambda_hq(&k, h, 2).unwrap() - limit).abs() / limit;
        assert!(gap(0.05) < 1e-3);
        // monotone approach as h decreases
        assert!(gap(0.05) < gap(0.1) && gap(0.1) < gap(0.3) && gap(0.3) < gap(1.0));
    }

    #[test]
    fn closed_form_constant_q2_h1() {
        // c_{1,2} = e / (4π sinh 1)
        let want = 1.0_f64.exp() / (4.0 * PI * 1.0_f64.sinh());
        let cf = von_mises_normalizing_constant(1.0, 2).unwrap();
        assert_eq!(cf.method, NormalizationMethod::ClosedForm);
        assert!((cf.value() - want).abs() < 1e-14);
        assert!((cf.value() - 0.184_065_5).abs() < 1e-7);
        let quad = normalizing_constant_quadrature(&DirectionalKernel::von_mises(), 1.0, 2).unwrap();
        assert!((quad.value() / want - 1.0).abs() < 1e-8);
    }

    #[test]
    fn closed_form_and_quadrature_agree() {
        let k = DirectionalKernel::von_mises();
        for q in [1usize, 2, 3, 5] {
            for h in [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0] {
                let a = von_mises_normalizing_constant(h, q).unwrap().ln_value;
                let b = normalizing_constant_quadrature(&k, h, q).unwrap().ln_value;
                assert!((a - b).abs() < 1e-8, "q={q} h={h}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn circle_constant_with_endpoint_singularity() {
        // q = 1: λ_{h,1} = ∫_0^{2/h²} e^{-r} (r(2 − rh²))^{-1/2} dr · ω_0.
        // Oracle: the same integral in the polar angle, θ ∈ [0, π],
        // λ_{h,1} = (2/h) ∫_0^π e^{−(1−cos θ)/h²} dθ, by a fine midpoint rule.
        let k = DirectionalKernel::von_mises();
        for h in [0.3, 1.0, 2.0] {
            let n = 200_000;
            let d = PI / n as f64;
            let s: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) * d;
                    (-(1.0 - t.cos()) / (h * h)).exp()
                })
                .sum::<f64>()
                * d;
            let oracle = 2.0 / h * s;
            let got = lambda_hq(&k, h, 1).unwrap();
            assert!((got / oracle - 1.0).abs() < 1e-9, "h={h}: {got} vs {oracle}");
        }
    }

    #[test]
    fn vmf_density_values() {
        let mu = UnitVector::basis(3, 2);
        let x = normalize(&[0.3, -0.2, 0.5]).unwrap();
        let uniform = vmf_log_density(&x, &mu, 0.0).unwrap();
        assert!((uniform - (-(4.0 * PI).ln())).abs() < 1e-14);
        assert!((uniform - (-2.53102)).abs() < 1e-5);
        let at_mode = vmf_log_density(&mu, &mu, 1.0).unwrap().exp();
        assert!((at_mode - 1.0_f64.exp() / (4.0 * PI * 1.0_f64.sinh())).abs() < 1e-14);
        // small-ν branch is continuous
        let a = vmf_log_normalizer(2, 1e-8 * 0.999);
        let b = vmf_log_normalizer(2, 1e-8 * 1.001);
        assert!((a - b).abs() < 1e-12);
        assert!((a - (-(4.0 * PI).ln())).abs() < 1e-8);
    }
}
