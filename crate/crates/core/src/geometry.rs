//! Geometry of the unit hypersphere `Ω_q ⊂ R^{q+1}`.
//!
//! Points are stored in ambient coordinates. Tangent vectors at `x` are
//! ambient vectors orthogonal to `x`, so the tangent space is simply the
//! orthogonal complement of the base point.

use crate::error::{Error, Result};

/// Norm below which a vector is treated as zero by [`normalize`].
pub const ZERO_NORM_THRESHOLD: f64 = 1e-300;

/// Tolerance on `‖x‖ - 1` accepted for externally supplied unit vectors.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Inputs closer than this to `x · y = -1` are rejected by [`log_map`].
pub const ANTIPODAL_TOL: f64 = 1e-10;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow/underflow of the squared terms
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

/// Euclidean (chord) distance between two ambient vectors.
pub fn chord_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A point on the unit sphere `Ω_q`, `q = dim - 1 >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `coords`; see [`normalize`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::WrongDimension {
                expected: 2,
                actual: coords.len(),
            });
        }
        let n = norm(&coords);
        if !(n > ZERO_NORM_THRESHOLD) || !n.is_finite() {
            return Err(Error::ZeroVector { norm: n });
        }
        Ok(Self(coords.into_iter().map(|v| v / n).collect()))
    }

    /// The `i`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(dim >= 2 && i < dim);
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    /// Wraps coordinates that are already unit-norm to [`UNIT_NORM_TOL`],
    /// renormalizing to remove residual drift.
    pub fn from_unit(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { index: 0, norm: n });
        }
        Self::new(coords)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Ambient dimension `q + 1`.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Intrinsic sphere dimension `q`.
    pub fn q(&self) -> usize {
        self.0.len() - 1
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A vector in the tangent space `T_x Ω_q`, i.e. orthogonal to `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    vec: Vec<f64>,
}

impl TangentVector {
    /// Builds a tangent vector, checking orthogonality to `base`.
    pub fn new(base: UnitVector, vec: Vec<f64>) -> Result<Self> {
        if vec.len() != base.dim() {
            return Err(Error::WrongDimension {
                expected: base.dim(),
                actual: vec.len(),
            });
        }
        let d = dot(base.as_slice(), &vec).abs();
        if d > 1e-10 * norm(&vec).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "vector is not tangent to its base point (|x·v| = {d:e})"
            )));
        }
        Ok(Self { base, vec })
    }

    pub fn zero(base: UnitVector) -> Self {
        let vec = vec![0.0; base.dim()];
        Self { base, vec }
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    /// Same base point, vector scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| v * s).collect(),
        }
    }
}

/// Orthonormal basis `B_x` of `T_x Ω_q`, stored column-wise.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    base: UnitVector,
    columns: Vec<Vec<f64>>,
}

impl TangentBasis {
    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    /// The `q` basis columns, each of length `q + 1`.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Coordinates `Bᵀ v` of an ambient vector.
    pub fn coordinates(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, v)).collect()
    }

    /// Ambient vector `B c` for tangent coordinates `c`.
    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.dim()];
        for (c, col) in coords.iter().zip(&self.columns) {
            for (o, b) in out.iter_mut().zip(col) {
                *o += c * b;
            }
        }
        out
    }
}

/// `v / ‖v‖₂`. Fails with [`Error::ZeroVector`] when `‖v‖₂ <= 1e-300`.
pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    UnitVector::new(v.to_vec())
}

/// `(I - x xᵀ) v`.
pub fn tangent_project(x: &UnitVector, v: &[f64]) -> Result<TangentVector> {
    if v.len() != x.dim() {
        return Err(Error::WrongDimension {
            expected: x.dim(),
            actual: v.len(),
        });
    }
    Ok(TangentVector {
        base: x.clone(),
        vec: project_raw(x.as_slice(), v),
    })
}

pub(crate) fn project_raw(x: &[f64], v: &[f64]) -> Vec<f64> {
    let r = dot(x, v);
    let mut out: Vec<f64> = v.iter().zip(x).map(|(vi, xi)| vi - r * xi).collect();
    // one re-orthogonalization pass keeps |x·out| at rounding level even when
    // v is nearly radial
    let r2 = dot(x, &out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o -= r2 * xi;
    }
    out
}

/// Great-circle distance in `[0, π]`.
///
/// Evaluated as `2·atan2(‖x − y‖, ‖x + y‖)`, which equals
/// `arccos(clamp(x·y, −1, 1))` but keeps full relative precision for nearly
/// coincident and nearly antipodal pairs.
pub fn geodesic_distance(x: &UnitVector, y: &UnitVector) -> f64 {
    geodesic_raw(x.as_slice(), y.as_slice())
}

pub(crate) fn geodesic_raw(x: &[f64], y: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(y) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// `Exp_x(v) = cos‖v‖ x + sin‖v‖ v/‖v‖`; returns `x` when `‖v‖ < 1e-15`.
pub fn exp_map(x: &UnitVector, v: &TangentVector) -> Result<UnitVector> {
    if v.vec.len() != x.dim() {
        return Err(Error::WrongDimension {
            expected: x.dim(),
            actual: v.vec.len(),
        });
    }
    Ok(exp_raw(x, &v.vec))
}

pub(crate) fn exp_raw(x: &UnitVector, v: &[f64]) -> UnitVector {
    let t = norm(v);
    if t < 1e-15 {
        return x.clone();
    }
    let (s, c) = t.sin_cos();
    let coords: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(v)
        .map(|(xi, vi)| c * xi + s * vi / t)
        .collect();
    UnitVector::new(coords).expect("exp map of a unit vector is unit-norm")
}

/// `Exp_x⁻¹(y)`: the tangent vector at `x` pointing along the minimizing
/// geodesic to `y`, with length equal to the geodesic distance.
pub fn log_map(x: &UnitVector, y: &UnitVector) -> Result<TangentVector> {
    if x.dim() != y.dim() {
        return Err(Error::WrongDimension {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    let d = x.dot(y);
    if d <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::AntipodalPoints { dot: d });
    }
    let u = project_raw(x.as_slice(), y.as_slice());
    let un = norm(&u);
    let theta = geodesic_distance(x, y);
    if un == 0.0 || theta == 0.0 {
        return Ok(TangentVector::zero(x.clone()));
    }
    let vec = u.iter().map(|ui| theta * ui / un).collect();
    Ok(TangentVector {
        base: x.clone(),
        vec,
    })
}

/// Deterministic orthonormal basis of `T_x` from a Householder reflection.
///
/// The reflection `H = I − 2wwᵀ/‖w‖²` with `w = x + sign(x₁) e₁` maps `e₁` to
/// `∓x`; the images of `e₂, …, e_{q+1}` are the returned columns. The sign
/// choice keeps `‖w‖ >= 1`.
pub fn tangent_basis(x: &UnitVector) -> TangentBasis {
    let xs = x.as_slice();
    let dim = xs.len();
    let sign = if xs[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = xs.to_vec();
    w[0] += sign;
    let ww = dot(&w, &w);
    let columns = (1..dim)
        .map(|j| {
            let f = 2.0 * w[j] / ww;
            (0..dim)
                .map(|i| {
                    let e = if i == j { 1.0 } else { 0.0 };
                    e - f * w[i]
                })
                .collect()
        })
        .collect();
    TangentBasis {
        base: x.clone(),
        columns,
    }
}

/// `(cos lat cos lon, cos lat sin lon, sin lat)` for angles in degrees.
pub fn lonlat_to_unit(lon_deg: f64, lat_deg: f64) -> Result<UnitVector> {
    if !(-90.0..=90.0).contains(&lat_deg) {
        return Err(Error::LatOutOfRange { lat: lat_deg });
    }
    let (slon, clon) = lon_deg.to_radians().sin_cos();
    let (slat, clat) = lat_deg.to_radians().sin_cos();
    UnitVector::new(vec![clat * clon, clat * slon, slat])
}

/// Inverse of [`lonlat_to_unit`]; longitude in `(−180, 180]`, set to 0 at the poles.
pub fn unit_to_lonlat(x: &UnitVector) -> Result<(f64, f64)> {
    if x.dim() != 3 {
        return Err(Error::WrongDimension {
            expected: 3,
            actual: x.dim(),
        });
    }
    let c = x.as_slice();
    let horiz = c[0].hypot(c[1]);
    let lat = c[2].atan2(horiz).to_degrees();
    let lon = if horiz < 1e-12 {
        0.0
    } else {
        c[1].atan2(c[0]).to_degrees()
    };
    Ok((lon, lat))
}

/// Embeds an angle (radians) on the unit circle `Ω_1`.
pub fn angle_to_unit(theta: f64) -> UnitVector {
    let (s, c) = theta.sin_cos();
    UnitVector(vec![c, s])
}

/// Angle in `(−π, π]` of a point on `Ω_1`.
pub fn unit_to_angle(x: &UnitVector) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            actual: x.dim(),
        });
    }
    Ok(x.as_slice()[1].atan2(x.as_slice()[0]))
}

/// A row-major collection of `n` unit vectors in `R^{q+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Validates that every row is unit-norm to [`UNIT_NORM_TOL`], then
    /// renormalizes each row exactly.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::WrongDimension {
                expected: 2,
                actual: dim,
            });
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form rows of length {dim}",
                coords.len()
            )));
        }
        let mut coords = coords;
        for (index, row) in coords.chunks_mut(dim).enumerate() {
            let n = norm(row);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm { index, norm: n });
            }
            row.iter_mut().for_each(|v| *v /= n);
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_unit_vectors(points: &[UnitVector]) -> Result<Self> {
        let dim = points.first().map(|p| p.dim()).ok_or(Error::EmptySet)?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.dim() != dim {
                return Err(Error::WrongDimension {
                    expected: dim,
                    actual: p.dim(),
                });
            }
            coords.extend_from_slice(p.as_slice());
        }
        Ok(Self { dim, coords })
    }

    /// Ambient dimension `q + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> usize {
        self.dim - 1
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> UnitVector {
        UnitVector(self.row(i).to_vec())
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_unit_vectors(&self) -> Vec<UnitVector> {
        self.rows().map(|r| UnitVector(r.to_vec())).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, p: &UnitVector) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::WrongDimension {
                expected: self.dim,
                actual: p.dim(),
            });
        }
        self.coords.extend_from_slice(p.as_slice());
        Ok(())
    }
}
