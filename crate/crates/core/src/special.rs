//! Special functions: Gauss–Legendre rules, log-Gamma, log-domain modified
//! Bessel functions of the first kind, and sphere surface areas.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Numerically stable `ln Σ exp(v_i)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// `P_n` from the Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_deriv(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

const BESSEL_GL_NODES: usize = 200;
const BESSEL_INTEGRAL_MAX_NU: f64 = 50.0;

fn gl200() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(BESSEL_GL_NODES))
}

fn gl50() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(50))
}

/// `ln I_α(ν)` for `α >= 0`, `ν >= 0`, without overflow.
///
/// For `ν <= 50` the integral representation
/// `I_α(ν) = (ν/2)^α / (√π Γ(α+½)) ∫_{-1}^{1} (1−t²)^{α−½} e^{νt} dt`
/// is evaluated after the substitution `t = cos φ` (which removes the endpoint
/// singularity at `α = 0`) with a 200-node Gauss–Legendre rule, accumulated
/// in the log domain. For `ν > 50` the large-argument Hankel expansion is used
/// while it converges to rounding level; otherwise the same integral is
/// evaluated on a window around the peak of its integrand.
///
/// Returns NaN for negative arguments, `0` for `I_0(0)` and `-inf` for
/// `I_α(0)`, `α > 0`.
pub fn log_bessel_i(alpha: f64, nu: f64) -> f64 {
    if !(alpha >= 0.0) || !(nu >= 0.0) {
        return f64::NAN;
    }
    if nu == 0.0 {
        return if alpha == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if nu.is_infinite() {
        return f64::INFINITY;
    }
    if nu <= BESSEL_INTEGRAL_MAX_NU {
        let (x, w) = gl200();
        let half = PI / 2.0;
        let terms: Vec<f64> = x
            .iter()
            .zip(w)
            .map(|(&t, &wt)| {
                let phi = half * (t + 1.0);
                log_integrand(alpha, nu, phi) + (wt * half).ln()
            })
            .collect();
        return integral_prefactor(alpha, nu) + log_sum_exp(&terms);
    }
    hankel_expansion(alpha, nu).unwrap_or_else(|| windowed_integral(alpha, nu))
}

/// `ln[(ν/2)^α e^ν / (√π Γ(α+½))]`.
fn integral_prefactor(alpha: f64, nu: f64) -> f64 {
    alpha * (nu / 2.0).ln() - 0.5 * PI.ln() - ln_gamma(alpha + 0.5) + nu
}

/// `ln[sin^{2α} φ · e^{ν(cos φ − 1)}]`, with `cos φ − 1 = −2 sin²(φ/2)`.
fn log_integrand(alpha: f64, nu: f64, phi: f64) -> f64 {
    let s = (phi / 2.0).sin();
    let sin_term = if alpha == 0.0 {
        0.0
    } else {
        2.0 * alpha * phi.sin().ln()
    };
    sin_term - 2.0 * nu * s * s
}

/// `I_α(ν) ~ e^ν/√(2πν) Σ_k (−1)^k a_k(α)/ν^k`. `None` when the series has
/// not reached relative 1e-17 before its terms start growing.
fn hankel_expansion(alpha: f64, nu: f64) -> Option<f64> {
    let mu = 4.0 * alpha * alpha;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..200 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * nu);
        if next.abs() > term.abs() && k > 1 {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            return (sum > 0.0).then(|| nu - 0.5 * (2.0 * PI * nu).ln() + sum.ln());
        }
    }
    None
}

fn windowed_integral(alpha: f64, nu: f64) -> f64 {
    // peak of 2α ln sin φ + ν cos φ solves ν c² + 2α c − ν = 0, c = cos φ*
    let c = (alpha.hypot(nu) - alpha) / nu;
    let phi_star = c.clamp(-1.0, 1.0).acos();
    let s2 = phi_star.sin().powi(2);
    let curvature = if alpha == 0.0 {
        nu
    } else {
        2.0 * alpha / s2.max(1e-300) + nu * c
    };
    let width = 1.0 / curvature.max(1e-300).sqrt();
    let lo = (phi_star - 40.0 * width).max(0.0);
    let hi = (phi_star + 40.0 * width).min(PI);
    let panels = 8;
    let (x, w) = gl50();
    let step = (hi - lo) / panels as f64;
    let mut terms = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let a = lo + p as f64 * step;
        for (&t, &wt) in x.iter().zip(w) {
            let phi = a + 0.5 * step * (t + 1.0);
            terms.push(log_integrand(alpha, nu, phi) + (0.5 * step * wt).ln());
        }
    }
    integral_prefactor(alpha, nu) + log_sum_exp(&terms)
}

/// Surface area `ω_q = 2π^{(q+1)/2} / Γ((q+1)/2)` of `Ω_q`.
pub fn surface_area(q: usize) -> f64 {
    ln_surface_area(q).exp()
}

pub fn ln_surface_area(q: usize) -> f64 {
    let a = (q as f64 + 1.0) / 2.0;
    2.0_f64.ln() + a * PI.ln() - ln_gamma(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    // ln I_α(ν) computed with mpmath at 40 digits.
    const REFERENCE: &[(f64, f64, f64)] = &[
        (0.0, 0.5, 0.061549719185481303941),
        (0.0, 1.0, 0.23591435850717864869),
        (0.5, 1.0, -0.064351991073531798753),
        (1.0, 3.7, 2.0062988837632051336),
        (1.5, 10.0, 7.8244084071596658726),
        (2.5, 49.9, 46.965328698662922997),
        (5.5, 20.0, 16.818790438371667091),
        (7.5, 50.0, 46.560438277819562386),
        (0.0, 50.1, 47.226571407570710197),
        (0.5, 100.0, 96.778476373801281574),
        (1.0, 100.0, 96.774707457591448463),
        (2.5, 10000.0, 9994.4755912658072361),
        (5.5, 10000.0, 9994.474391205837246),
        (7.5, 80.0, 76.538097180138956452),
        (12.0, 60.0, 55.829961891426061126),
        (20.0, 55.0, 48.450278589919591501),
        (20.0, 500.0, 495.57366042788682858),
        (3.3, 0.01, -19.665462542025389425),
        (0.0, 1000000.0, 999992.17330631281325),
        (1.5, 1000000.0, 999992.17330518781269),
    ];

    #[test]
    fn matches_reference_values() {
        for &(a, nu, want) in REFERENCE {
            let got = log_bessel_i(a, nu);
            // I to relative 1e-10 means ln I to absolute 1e-10, loosened to a
            // few ulps where ln I itself is large
            let tol = 1e-10_f64.max(4.0 * f64::EPSILON * want.abs());
            assert!((got - want).abs() < tol, "α={a} ν={nu}: {got} vs {want}");
        }
    }

    #[test]
    fn non_half_integer_order_is_close() {
        // sin^{0.5} has an endpoint branch point; the fixed rule is less exact
        let got = log_bessel_i(0.25, 3.0);
        assert!((got - 1.5702311073117739605).abs() < 1e-6);
    }

    #[test]
    fn trivial_and_closed_form_values() {
        assert_eq!(log_bessel_i(0.0, 0.0), 0.0);
        assert_eq!(log_bessel_i(1.0, 0.0), f64::NEG_INFINITY);
        // I_{1/2}(ν) = √(2/(πν)) sinh ν
        let want = ((2.0 / PI).sqrt() * 1.0_f64.sinh()).ln();
        assert!((log_bessel_i(0.5, 1.0) - want).abs() < 1e-12);
        assert!((want - (-0.06435)).abs() < 1e-5);
        for nu in [0.1, 2.0, 17.0, 49.0, 51.0, 300.0] {
            let want: f64 = 0.5 * (2.0 / (PI * nu)).ln() + nu + (-(-2.0 * nu).exp_m1() / 2.0).ln();
            assert!((log_bessel_i(0.5, nu) - want).abs() < 1e-11, "ν={nu}");
        }
    }

    #[test]
    fn large_argument_does_not_overflow() {
        let got = log_bessel_i(0.5, 1000.0);
        // exact: ln(√(2/(πν)) sinh ν), sinh ν = e^ν/2 to double precision
        let want = 1000.0 + 0.5 * (2.0 / (PI * 1000.0)).ln() - 2.0_f64.ln();
        assert!(got.is_finite());
        assert!((got - want).abs() < 1e-6);
        // leading asymptotic e^ν/√(2πν) agrees to relative 1e-6 at ν = 1e6
        let asym = 1e6 - 0.5 * (2.0 * PI * 1e6).ln();
        assert!((log_bessel_i(0.0, 1e6) - asym).abs() < 1e-6);
    }

    #[test]
    fn branches_agree_at_the_switch() {
        for a in [0.0, 0.5, 1.0, 2.5, 6.0] {
            let below = log_bessel_i(a, 50.0);
            let windowed = windowed_integral(a, 50.0);
            assert!((below - windowed).abs() < 1e-12, "α={a}");
            let above = log_bessel_i(a, 50.0 + 1e-9);
            assert!((below - above).abs() < 1e-8, "α={a}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(200);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((i - (1.0_f64.exp() - (-1.0_f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn surface_areas() {
        assert!((surface_area(0) - 2.0).abs() < 1e-14);
        assert!((surface_area(1) - 2.0 * PI).abs() < 1e-13);
        assert!((surface_area(2) - 4.0 * PI).abs() < 1e-13);
        assert!((surface_area(3) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((surface_area(1) - 6.28319).abs() < 1e-5);
        assert!((surface_area(2) - 12.56637).abs() < 1e-5);
        assert!((surface_area(3) - 19.73921).abs() < 1e-5);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2.0_f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(800.0, 800.0) - (800.0 + 2.0_f64.ln())).abs() < 1e-12);
    }
}
