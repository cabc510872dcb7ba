//! Spherical and projective metric primitives.
//!
//! Points live on the unit sphere S^d ⊂ R^{d+1}. Distances are evaluated with
//! chord-based formulas (`2 asin(|x - y| / 2)`) rather than `acos(x · y)`,
//! which loses about half the significant digits near coincident or
//! antipodal pairs. The two agree exactly in exact arithmetic.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|x|` for points and on `v · x` for tangent vectors.
pub const UNIT_TOL: f64 = 1e-9;

/// `|x · y|` at or below this counts as orthogonal: Λ is exactly 1 and the
/// kernel derivative vanishes.
pub const ORTHO_SNAP: f64 = 1e-9;

/// Angular cutoff around coincident and antipodal pairs for gradients.
pub const COINCIDENT_CUTOFF: f64 = 1e-7;

/// Cap on gradient magnitude in the singular zone for α ≤ 1.
pub const GRADIENT_CAP: f64 = 1e6;

/// A unit vector in R^{d+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Normalizes `coords` onto the sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidPoint(format!(
                "need at least 2 coordinates (d >= 1), got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        let norm = norm(&coords);
        if norm == 0.0 {
            return Err(Error::InvalidPoint("zero vector".into()));
        }
        Ok(Self::from_unnormalized(coords, norm))
    }

    fn from_unnormalized(mut coords: Vec<f64>, norm: f64) -> Self {
        if (norm - 1.0).abs() > f64::EPSILON {
            coords.iter_mut().for_each(|c| *c /= norm);
        }
        Self { coords }
    }

    /// Standard basis vector `e_k` of R^{d+1}.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if d < 1 || k > d {
            return Err(Error::InvalidArgument(format!(
                "basis vector e_{k} does not exist in R^{}",
                d + 1
            )));
        }
        let mut coords = vec![0.0; d + 1];
        coords[k] = 1.0;
        Ok(Self { coords })
    }

    /// Point at angle `theta` on the circle S^1.
    pub fn on_circle(theta: f64) -> Self {
        Self {
            coords: vec![theta.cos(), theta.sin()],
        }
    }

    /// Uniformly distributed point on S^d.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        loop {
            let coords: Vec<f64> = (0..=d).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&coords);
            if n > 1e-300 {
                return Self::from_unnormalized(coords, n);
            }
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Intrinsic dimension d.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn antipode(&self) -> SpherePoint {
        Self {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    /// Applies a (d+1)×(d+1) orthogonal matrix.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<SpherePoint> {
        check_dims(m.ncols(), self.ambient_dim())?;
        check_dims(m.nrows(), self.ambient_dim())?;
        let coords = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * self.coords[j]).sum())
            .collect();
        SpherePoint::new(coords)
    }

    pub(crate) fn check_same_dim(&self, other: &SpherePoint) -> Result<()> {
        check_dims(self.ambient_dim(), other.ambient_dim())
    }
}

/// A tangent vector at a point of the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    vec: Vec<f64>,
}

impl TangentVector {
    /// Projects `vec` onto the tangent space at `base`.
    pub fn new(base: SpherePoint, vec: Vec<f64>) -> Result<Self> {
        check_dims(base.ambient_dim(), vec.len())?;
        let ip = dot(base.coords(), &vec);
        let vec = vec
            .iter()
            .zip(base.coords())
            .map(|(v, b)| v - ip * b)
            .collect();
        Ok(Self { base, vec })
    }

    pub fn zero(base: SpherePoint) -> Self {
        let vec = vec![0.0; base.ambient_dim()];
        Self { base, vec }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    pub fn scaled(&self, factor: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| v * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// Λ(x, y)^α, with α = ∞ read as the orthogonality indicator.
    LambdaPower,
    /// g(x · y) = 1 - (x · y)^2.
    QuadraticG,
}

/// Interaction kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub alpha: f64,
    /// Angular tolerance (radians) of the α = ∞ indicator.
    pub orth_tol: f64,
}

impl KernelSpec {
    pub const DEFAULT_ORTH_TOL: f64 = 1e-9;

    pub fn lambda(alpha: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::LambdaPower,
            alpha,
            orth_tol: Self::DEFAULT_ORTH_TOL,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn quadratic() -> Self {
        Self {
            family: KernelFamily::QuadraticG,
            alpha: 2.0,
            orth_tol: Self::DEFAULT_ORTH_TOL,
        }
    }

    pub fn with_orth_tol(mut self, orth_tol: f64) -> Result<Self> {
        self.orth_tol = orth_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.orth_tol > 0.0 && self.orth_tol <= 1e-3) {
            return Err(Error::InvalidKernel(format!(
                "orth_tol must lie in (0, 1e-3], got {}",
                self.orth_tol
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.family == KernelFamily::QuadraticG || self.alpha.is_finite()
    }

    /// Kernel value on raw coordinate slices of equal length.
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::QuadraticG => {
                let ip = dot(x, y);
                (1.0 - ip * ip).max(0.0)
            }
            KernelFamily::LambdaPower if self.alpha.is_infinite() => {
                if dot(x, y).abs() <= self.orth_tol.sin() {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::LambdaPower => {
                let lam = lambda_raw(x, y);
                if self.alpha == 1.0 {
                    lam
                } else if self.alpha == 2.0 {
                    lam * lam
                } else {
                    lam.powf(self.alpha)
                }
            }
        }
    }
}

/// Result of [`grad_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGradient {
    pub tangent: TangentVector,
    /// Set when the pair sat in the singular zone (α ≤ 1, near-coincident or
    /// near-antipodal) and the magnitude was capped at [`GRADIENT_CAP`].
    pub capped: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn chord(a: &[f64], b: &[f64], sign: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - sign * y;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Geodesic distance on raw unit vectors.
pub(crate) fn rho_raw(x: &[f64], y: &[f64]) -> f64 {
    let minus = chord(x, y, 1.0);
    let plus = chord(x, y, -1.0);
    if minus <= plus {
        2.0 * (0.5 * minus).min(1.0).asin()
    } else {
        PI - 2.0 * (0.5 * plus).min(1.0).asin()
    }
}

/// Projective distance min(ρ(x, y), ρ(x, -y)) on raw unit vectors.
pub(crate) fn projective_rho_raw(x: &[f64], y: &[f64]) -> f64 {
    let c = chord(x, y, 1.0).min(chord(x, y, -1.0));
    2.0 * (0.5 * c).min(1.0).asin()
}

/// Λ on raw unit vectors, snapped to 1 at numerically orthogonal pairs.
pub(crate) fn lambda_raw(x: &[f64], y: &[f64]) -> f64 {
    if dot(x, y).abs() <= ORTHO_SNAP {
        return 1.0;
    }
    (FRAC_2_PI * projective_rho_raw(x, y)).min(1.0)
}

/// ρ(x, y) = arccos(x · y), in [0, π].
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(rho_raw(x.coords(), y.coords()))
}

/// Distance on RP^d, in [0, π/2].
pub fn projective_rho(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(projective_rho_raw(x.coords(), y.coords()))
}

/// Λ(x, y) = (2/π) min(ρ, π - ρ): the projective distance scaled to unit
/// diameter.
pub fn projective_kernel(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(lambda_raw(x.coords(), y.coords()))
}

pub fn kernel_value(spec: &KernelSpec, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(spec.eval(x.coords(), y.coords()))
}

/// Riemannian exponential map at `v.base()`.
pub fn exp_map(v: &TangentVector) -> Result<SpherePoint> {
    let len = v.norm();
    if !(len < PI) {
        return Err(Error::OutsideInjectivityRadius { norm: len });
    }
    if len == 0.0 {
        return Ok(v.base.clone());
    }
    let (s, c) = len.sin_cos();
    let coords: Vec<f64> = v
        .base
        .coords()
        .iter()
        .zip(&v.vec)
        .map(|(b, t)| c * b + s * t / len)
        .collect();
    SpherePoint::new(coords)
}

/// Inverse of [`exp_map`]: the tangent vector at `base` pointing to `x`.
pub fn log_map(x: &SpherePoint, base: &SpherePoint) -> Result<TangentVector> {
    x.check_same_dim(base)?;
    let rho = rho_raw(x.coords(), base.coords());
    if rho >= PI - 1e-9 {
        return Err(Error::NearAntipodal);
    }
    let ip = base.dot(x);
    let perp: Vec<f64> = x
        .coords()
        .iter()
        .zip(base.coords())
        .map(|(a, b)| a - ip * b)
        .collect();
    let pn = norm(&perp);
    if pn == 0.0 || rho == 0.0 {
        return Ok(TangentVector::zero(base.clone()));
    }
    TangentVector::new(base.clone(), perp.iter().map(|p| rho * p / pn).collect())
}

/// Riemannian gradient in `x` of `kernel(x, y)`.
pub fn grad_kernel(spec: &KernelSpec, x: &SpherePoint, y: &SpherePoint) -> Result<KernelGradient> {
    x.check_same_dim(y)?;
    if !spec.is_finite() {
        return Err(Error::InvalidKernel(
            "gradient needs a finite exponent".into(),
        ));
    }
    let (vec, capped) = grad_raw(spec, x.coords(), y.coords());
    Ok(KernelGradient {
        tangent: TangentVector::new(x.clone(), vec)?,
        capped,
    })
}

/// Ambient-coordinate gradient; `spec` must be finite.
pub(crate) fn grad_raw(spec: &KernelSpec, x: &[f64], y: &[f64]) -> (Vec<f64>, bool) {
    let ip = dot(x, y);
    let perp: Vec<f64> = y.iter().zip(x).map(|(b, a)| b - ip * a).collect();
    if spec.family == KernelFamily::QuadraticG {
        return (perp.iter().map(|p| -2.0 * ip * p).collect(), false);
    }
    let zero = || vec![0.0; x.len()];
    if ip.abs() <= ORTHO_SNAP {
        return (zero(), false);
    }
    let pn = norm(&perp);
    let alpha = spec.alpha;
    let rho = rho_raw(x, y);
    // Λ_0' is +2/π on the near side (ρ < π/2) and -2/π beyond.
    let side = if ip > 0.0 { 1.0 } else { -1.0 };
    if !(COINCIDENT_CUTOFF..=PI - COINCIDENT_CUTOFF).contains(&rho) {
        if alpha > 1.0 || pn == 0.0 {
            return (zero(), alpha <= 1.0);
        }
        let lam0 = FRAC_2_PI * rho.min(PI - rho);
        let mag = if lam0 > 0.0 {
            (alpha * lam0.powf(alpha - 1.0) * FRAC_2_PI).min(GRADIENT_CAP)
        } else {
            GRADIENT_CAP
        };
        return (perp.iter().map(|p| -side * mag * p / pn).collect(), true);
    }
    let lam0 = FRAC_2_PI * rho.min(PI - rho);
    let dlam = alpha * lam0.powf(alpha - 1.0) * FRAC_2_PI * side;
    // ∇ρ = -(y - (x·y)x) / sin ρ, and |y - (x·y)x| = sin ρ.
    (perp.iter().map(|p| -dlam * p / pn).collect(), false)
}

/// Haar-distributed orthogonal matrix of size n×n.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Tangent vector at `base` drawn uniformly from the open ball of the given
/// radius.
pub fn random_tangent_in_ball<R: Rng + ?Sized>(
    base: &SpherePoint,
    radius: f64,
    rng: &mut R,
) -> TangentVector {
    let d = base.dim();
    loop {
        let raw: Vec<f64> = (0..base.ambient_dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let t = TangentVector::new(base.clone(), raw).expect("dimensions agree");
        let n = t.norm();
        if n > 1e-12 {
            let u: f64 = rng.random();
            let len = radius * u.powf(1.0 / d as f64);
            return t.scaled(len / n);
        }
    }
}
