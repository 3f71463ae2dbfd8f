//! Command-line definitions and flag value parsers.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dirms::bandwidth::{rot_bandwidth, BandwidthSelection};
use dirms::meanshift::MsConfig;
use dirms::{DirectionalKernel, PointSet};

#[derive(Debug, Parser)]
#[command(
    name = "dirms",
    version,
    about = "Directional kernel density estimation and mean-shift clustering on the hypersphere"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a dataset by directional mean shift.
    Cluster(ClusterArgs),
    /// Evaluate the density estimate on a regular grid (q = 1 or 2).
    Density(DensityArgs),
    /// Run a simulation scenario and report misclassification rates.
    Simulate(SimulateArgs),
    /// Check derivatives, normalization, modes and ascent against brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Columns `lon,lat` in degrees.
    #[value(name = "lonlat_deg")]
    LonlatDeg,
    /// Columns `x0,x1,...,xq`.
    #[value(name = "cartesian")]
    Cartesian,
    /// Column `theta` in radians (circle data).
    #[value(name = "angles_rad")]
    AnglesRad,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::LonlatDeg => "lonlat_deg",
            Format::Cartesian => "cartesian",
            Format::AnglesRad => "angles_rad",
        })
    }
}

/// `COLUMN=MIN`: keep rows whose `COLUMN` value is at least `MIN`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinFilter {
    pub column: String,
    pub min: f64,
}

impl FromStr for MinFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (column, min) = s
            .split_once('=')
            .ok_or_else(|| format!("expected COLUMN=MIN, got `{s}`"))?;
        let min: f64 = min
            .trim()
            .parse()
            .map_err(|_| format!("`{min}` is not a number"))?;
        if column.trim().is_empty() {
            return Err("empty column name".into());
        }
        Ok(Self {
            column: column.trim().to_string(),
            min,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Self::Fixed(h)),
            _ => Err(format!("bandwidth must be `auto` or a positive number, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    VonMises,
    Rational(f64),
    /// `L(r) = r^{-1/2}`; unbounded at the origin and rejected by validation.
    InverseSqrt,
}

impl FromStr for KernelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vonmises" | "von-mises" => Ok(Self::VonMises),
            "rational" => Ok(Self::Rational(2.0)),
            "inverse-sqrt" => Ok(Self::InverseSqrt),
            _ => {
                if let Some(p) = s.strip_prefix("rational:") {
                    p.parse()
                        .map(Self::Rational)
                        .map_err(|_| format!("bad rational power `{p}`"))
                } else {
                    Err(format!(
                        "unknown kernel `{s}` (expected vonmises, rational[:POWER] or inverse-sqrt)"
                    ))
                }
            }
        }
    }
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelChoice::VonMises => f.write_str("vonmises"),
            KernelChoice::Rational(p) => write!(f, "rational:{p}"),
            KernelChoice::InverseSqrt => f.write_str("inverse-sqrt"),
        }
    }
}

impl KernelChoice {
    pub fn build(self) -> dirms::Result<DirectionalKernel> {
        match self {
            KernelChoice::VonMises => Ok(DirectionalKernel::von_mises()),
            KernelChoice::Rational(p) => DirectionalKernel::rational(p),
            KernelChoice::InverseSqrt => DirectionalKernel::custom(
                "inverse-sqrt",
                |r: f64| 1.0 / r.sqrt(),
                |r: f64| -0.5 * r.powf(-1.5),
                None,
            ),
        }
    }
}

/// Grid size: `N` for the circle, `NLONxNLAT` for the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRes {
    Single(usize),
    LonLat(usize, usize),
}

impl FromStr for GridRes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| -> Result<usize, String> {
            match t.trim().parse::<usize>() {
                Ok(v) if v >= 2 => Ok(v),
                _ => Err(format!("grid size must be an integer >= 2, got `{t}`")),
            }
        };
        match s.split_once(['x', 'X', '×']) {
            Some((a, b)) => Ok(Self::LonLat(num(a)?, num(b)?)),
            None => Ok(Self::Single(num(s)?)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::LonlatDeg)]
    pub format: Format,
    /// Drop rows whose COLUMN value is below MIN, e.g. `diameter=5`.
    #[arg(long, value_name = "COLUMN=MIN")]
    pub min_filter: Option<MinFilter>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Bandwidth: a positive number, or `auto` for the rule of thumb.
    #[arg(long, default_value = "auto")]
    pub bandwidth: Bandwidth,
    /// Factor applied to the bandwidth (manual or automatic).
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_multiplier: f64,
    /// vonmises, rational[:POWER] or inverse-sqrt.
    #[arg(long, default_value = "vonmises")]
    pub kernel: KernelChoice,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Convergence tolerance on `1 - y_{s+1}ᵀy_s`.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Geodesic distance below which terminal points share a mode.
    #[arg(long, default_value_t = 1e-2)]
    pub merge_tol: f64,
    /// Use the blurring variant (data are moved each sweep).
    #[arg(long)]
    pub blurring: bool,
}

impl SolverArgs {
    pub fn config(&self) -> dirms::Result<MsConfig> {
        let cfg = MsConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            merge_tol: self.merge_tol,
            record_trace: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Seed echoed in the report; generated when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `NLONxNLAT` on the sphere (default 181x91), `N` on the circle (default 360).
    #[arg(long)]
    pub grid_res: Option<GridRes>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Laplace + von Mises mixture on the circle.
    Circular,
    /// Single vMF((1,0,0), 5) on the 2-sphere.
    Sphere1,
    /// Three-component vMF mixture on the 2-sphere.
    Sphere3,
    /// Four vMF components on the q-sphere, q >= 3.
    Hyperq,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Circular => "circular",
            Scenario::Sphere1 => "sphere1",
            Scenario::Sphere3 => "sphere3",
            Scenario::Hyperq => "hyperq",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    /// Sample size; 60 for the circular scenario, 1000 otherwise.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sphere dimension for hyperq.
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    /// Sweep hyperq over q..=q_max.
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Component concentration for hyperq.
    #[arg(long, default_value_t = 10.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Defaults to 0.3 for the circular scenario and `auto` otherwise.
    #[arg(long)]
    pub bandwidth: Option<Bandwidth>,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_multiplier: f64,
    #[arg(long, default_value = "vonmises")]
    pub kernel: KernelChoice,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Random probe points for the derivative checks.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    /// Starting points for the ascent audit.
    #[arg(long, default_value_t = 200)]
    pub ascent_starts: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write `verify.json` here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

/// The bandwidth actually used, with the rule-of-thumb details when automatic.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedBandwidth {
    pub h: f64,
    pub mode: &'static str,
    pub multiplier: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_of_thumb_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_bar: Option<f64>,
}

pub fn resolve_bandwidth(
    data: &PointSet,
    bandwidth: Bandwidth,
    multiplier: f64,
) -> anyhow::Result<ResolvedBandwidth> {
    anyhow::ensure!(
        multiplier > 0.0 && multiplier.is_finite(),
        "bandwidth multiplier must be positive, got {multiplier}"
    );
    Ok(match bandwidth {
        Bandwidth::Fixed(h) => ResolvedBandwidth {
            h: h * multiplier,
            mode: "manual",
            multiplier,
            rule_of_thumb_h: None,
            nu_hat: None,
            r_bar: None,
        },
        Bandwidth::Auto => {
            let BandwidthSelection { h, nu_hat, r_bar, .. } = rot_bandwidth(data)?;
            ResolvedBandwidth {
                h: h * multiplier,
                mode: "auto",
                multiplier,
                rule_of_thumb_h: Some(h),
                nu_hat: Some(nu_hat),
                r_bar: Some(r_bar),
            }
        }
    })
}

/// The given seed, or a fresh one from the process's hasher keys.
pub fn seed_or_random(seed: Option<u64>) -> u64 {
    use std::hash::{BuildHasher, Hasher};
    seed.unwrap_or_else(|| {
        let mut h = std::collections::hash_map::RandomState::new().build_hasher();
        h.write_u128(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos()),
        );
        h.finish()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flag_values() {
        assert_eq!("auto".parse::<Bandwidth>().unwrap(), Bandwidth::Auto);
        assert_eq!("0.3".parse::<Bandwidth>().unwrap(), Bandwidth::Fixed(0.3));
        assert!("-1".parse::<Bandwidth>().is_err());
        assert!("0".parse::<Bandwidth>().is_err());

        assert_eq!("rational:3".parse::<KernelChoice>().unwrap(), KernelChoice::Rational(3.0));
        assert!("gaussian".parse::<KernelChoice>().is_err());

        assert_eq!("181x91".parse::<GridRes>().unwrap(), GridRes::LonLat(181, 91));
        assert_eq!("360".parse::<GridRes>().unwrap(), GridRes::Single(360));
        assert!("1x4".parse::<GridRes>().is_err());

        let f: MinFilter = "diameter=5".parse().unwrap();
        assert_eq!((f.column.as_str(), f.min), ("diameter", 5.0));
        assert!("diameter".parse::<MinFilter>().is_err());
    }

    #[test]
    fn inverse_sqrt_kernel_is_rejected() {
        assert!(KernelChoice::VonMises.build().is_ok());
        assert!(matches!(
            KernelChoice::InverseSqrt.build(),
            Err(dirms::Error::InvalidKernel { .. })
        ));
    }
}
