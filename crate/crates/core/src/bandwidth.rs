//! Rule-of-thumb bandwidth under a von Mises–Fisher reference density.

use crate::error::{Error, Result};
use crate::geometry::{norm, PointSet};
use crate::special::log_bessel_i;

/// Resultant lengths at or above `1 − R_BAR_LIMIT` are treated as a point mass.
pub const R_BAR_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSelection {
    pub h: f64,
    pub nu_hat: f64,
    pub r_bar: f64,
    pub n: usize,
    pub q: usize,
}

/// `R̄ = ‖Σ Xᵢ‖ / n`.
pub fn mean_resultant_length(data: &PointSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut sum = vec![0.0; data.dim()];
    for r in data.rows() {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
    }
    Ok((norm(&sum) / data.len() as f64).min(1.0))
}

/// `ν̂ = R̄ (q + 1 − R̄²) / (1 − R̄²)`.
pub fn concentration_estimate(r_bar: f64, q: usize) -> Result<f64> {
    if !(0.0..1.0 - R_BAR_LIMIT).contains(&r_bar) {
        return Err(Error::DegenerateConcentration { r_bar });
    }
    let r2 = r_bar * r_bar;
    Ok(r_bar * (q as f64 + 1.0 - r2) / (1.0 - r2))
}

/// Natural log of the rule-of-thumb bandwidth for concentration `nu_hat`,
/// sample size `n` and sphere dimension `q`:
///
/// `h = [4 √π I_{(q−1)/2}(ν)² / (ν^{(q+1)/2} [2q I_{(q+1)/2}(2ν) + (q+2) ν I_{(q+3)/2}(2ν)] n)]^{1/(q+4)}`.
pub fn ln_rot_formula(nu_hat: f64, n: usize, q: usize) -> Result<f64> {
    if !(nu_hat > 0.0) || !nu_hat.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rule of thumb needs a positive concentration, got {nu_hat}"
        )));
    }
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let qf = q as f64;
    let ln_num = 4.0_f64.ln() + 0.5 * std::f64::consts::PI.ln()
        + 2.0 * log_bessel_i(0.5 * (qf - 1.0), nu_hat);
    // log of 2q I_{(q+1)/2}(2ν) + (q+2) ν I_{(q+3)/2}(2ν), both terms positive
    let a = (2.0 * qf).ln() + log_bessel_i(0.5 * (qf + 1.0), 2.0 * nu_hat);
    let b = (qf + 2.0).ln() + nu_hat.ln() + log_bessel_i(0.5 * (qf + 3.0), 2.0 * nu_hat);
    let m = a.max(b);
    let ln_bracket = m + ((a - m).exp() + (b - m).exp()).ln();
    let ln_den = 0.5 * (qf + 1.0) * nu_hat.ln() + ln_bracket + (n as f64).ln();
    Ok((ln_num - ln_den) / (qf + 4.0))
}

/// Rule-of-thumb bandwidth with `ν̂` estimated from the data.
pub fn rot_bandwidth(data: &PointSet) -> Result<BandwidthSelection> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rule of thumb needs at least 2 points, got {n}"
        )));
    }
    let q = data.q();
    let r_bar = mean_resultant_length(data)?;
    let nu_hat = concentration_estimate(r_bar, q)?;
    let h = ln_rot_formula(nu_hat, n, q)?.exp();
    Ok(BandwidthSelection {
        h,
        nu_hat,
        r_bar,
        n,
        q,
    })
}
