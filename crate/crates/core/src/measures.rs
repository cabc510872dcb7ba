//! Discrete probability measures on S^d.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, norm, projective_rho_raw, SpherePoint};
use crate::rng::seeded;

/// Atoms lighter than this are dropped on normalization.
pub const MIN_WEIGHT: f64 = 1e-15;

/// Projective distance under which atoms are merged by [`project_to_rp`].
pub const MERGE_TOL: f64 = 1e-9;

/// Slack accepted by the file loader on weight sums and point norms.
pub const LOAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: SpherePoint,
    pub weight: f64,
}

/// A finitely supported probability measure on S^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MeasureFile", try_from = "MeasureFile")]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    /// Builds a measure, rescaling the weights to sum to one and dropping
    /// negligible atoms.
    pub fn new(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidMeasure("no atoms".into()))?;
        let dim = first.dim();
        for p in &points {
            check_dims(dim + 1, p.ambient_dim())?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let atoms = points
            .into_iter()
            .zip(weights)
            .map(|(point, weight)| Atom { point, weight })
            .collect();
        Self::from_atoms(dim, atoms)
    }

    fn from_atoms(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|a| Atom {
                weight: a.weight / total,
                ..a
            })
            .filter(|a| a.weight >= MIN_WEIGHT)
            .collect();
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if total != 1.0 {
            atoms.iter_mut().for_each(|a| a.weight /= total);
        }
        Ok(Self { dim, atoms })
    }

    /// Equal weights 1/N on the given points.
    pub fn uniform(points: Vec<SpherePoint>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn dirac(point: SpherePoint) -> Self {
        Self {
            dim: point.dim(),
            atoms: vec![Atom { point, weight: 1.0 }],
        }
    }

    /// Intrinsic dimension d of the underlying sphere.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn points(&self) -> impl Iterator<Item = &SpherePoint> {
        self.atoms.iter().map(|a| &a.point)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// True when every atom carries weight 1/len within `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let target = 1.0 / self.len() as f64;
        self.atoms.iter().all(|a| (a.weight - target).abs() <= tol)
    }

    pub(crate) fn check_same_dim(&self, other: &DiscreteMeasure) -> Result<()> {
        check_dims(self.dim, other.dim)
    }

    /// Pushes the measure forward under an orthogonal matrix.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    point: a.point.transform(m)?,
                    weight: a.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            atoms,
        })
    }

    /// Replaces atom `i` by its antipode wherever `flips[i]` is set.
    pub fn flip_signs(&self, flips: &[bool]) -> Self {
        let atoms = self
            .atoms
            .iter()
            .zip(flips.iter().chain(std::iter::repeat(&false)))
            .map(|(a, &f)| Atom {
                point: if f { a.point.antipode() } else { a.point.clone() },
                weight: a.weight,
            })
            .collect();
        Self {
            dim: self.dim,
            atoms,
        }
    }

    /// Replaces atom positions, keeping weights.
    pub fn with_points(&self, points: Vec<SpherePoint>) -> Result<Self> {
        if points.len() != self.len() {
            return Err(Error::InvalidMeasure("point count changed".into()));
        }
        let weights = self.weights();
        Self::new(points, weights)
    }

    /// Replaces weights, keeping positions.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.points().cloned().collect(), weights)
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &DiscreteMeasure, t: f64) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut points: Vec<SpherePoint> = self.points().cloned().collect();
        let mut weights: Vec<f64> = self.atoms.iter().map(|a| a.weight * (1.0 - t)).collect();
        points.extend(other.points().cloned());
        weights.extend(other.atoms.iter().map(|a| a.weight * t));
        Self::new(points, weights)
    }

    pub fn to_file(&self) -> MeasureFile {
        MeasureFile {
            dim: self.dim,
            points: self.points().map(|p| p.coords().to_vec()).collect(),
            weights: self.weights(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text)?;
        file.into_measure()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// On-disk measure representation:
/// `{"dim": d, "points": [[d+1 reals], ...], "weights": [reals, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl From<DiscreteMeasure> for MeasureFile {
    fn from(mu: DiscreteMeasure) -> Self {
        mu.to_file()
    }
}

impl TryFrom<MeasureFile> for DiscreteMeasure {
    type Error = Error;

    fn try_from(file: MeasureFile) -> Result<Self> {
        file.into_measure()
    }
}

impl MeasureFile {
    /// Validates and converts; weights and norms within [`LOAD_TOL`] of
    /// their targets are renormalized, anything further off is rejected.
    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        if self.dim < 1 {
            return Err(Error::InvalidMeasure("dim must be at least 1".into()));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidMeasure("no points".into()));
        }
        if self.points.len() != self.weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                self.points.len(),
                self.weights.len()
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if !((total - 1.0).abs() <= LOAD_TOL) {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let points = self
            .points
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if c.len() != self.dim + 1 {
                    return Err(Error::InvalidMeasure(format!(
                        "point {i} has {} coordinates, expected {}",
                        c.len(),
                        self.dim + 1
                    )));
                }
                let n = norm(&c);
                if !((n - 1.0).abs() <= LOAD_TOL) {
                    return Err(Error::InvalidMeasure(format!(
                        "point {i} has norm {n}, not 1"
                    )));
                }
                SpherePoint::new(c)
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(points, self.weights)
    }
}

/// Measure classes of the problem, after projection to RP^d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureClass {
    /// N equal atoms.
    PNEq,
    /// Support is an orthonormal basis.
    POn,
    /// Support is an orthonormal basis with equal weights.
    POnEq,
    /// Projectively supported on d+1 orthogonal lines.
    PDelta,
    /// Projectively supported on d+1 orthogonal lines with equal weights.
    PDeltaEq,
    /// Essentially equivalent to a Fejes Tóth configuration ψ_N.
    PNDeltaEq,
    Other,
}

/// Mass 1/(d+1) on each of e_0, ..., e_d.
pub fn equidistributed_basis(d: usize) -> Result<DiscreteMeasure> {
    if d < 1 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let points = (0..=d)
        .map(|k| SpherePoint::basis(d, k))
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::uniform(points)
}

/// Sizes `n_0..n_d` of the classes i ≡ j mod d+1 for N particles.
pub fn fejes_toth_class_sizes(d: usize, n: usize) -> Vec<usize> {
    let (q, r) = (n / (d + 1), n % (d + 1));
    (0..=d).map(|j| if j < r { q + 1 } else { q }).collect()
}

/// ψ_N: N particles of mass 1/N spread over e_0..e_d as evenly as possible,
/// with coincident particles merged.
pub fn fejes_toth_config(d: usize, n: usize) -> Result<DiscreteMeasure> {
    if d < 1 || n < 1 {
        return Err(Error::InvalidArgument("need d >= 1 and N >= 1".into()));
    }
    let (mut points, mut weights) = (Vec::new(), Vec::new());
    for (j, size) in fejes_toth_class_sizes(d, n).into_iter().enumerate() {
        if size > 0 {
            points.push(SpherePoint::basis(d, j)?);
            weights.push(size as f64 / n as f64);
        }
    }
    DiscreteMeasure::new(points, weights)
}

/// N uniformly distributed points; weights 1/N, or flat-Dirichlet when
/// `weighted`.
pub fn random_configuration(d: usize, n: usize, seed: u64, weighted: bool) -> Result<DiscreteMeasure> {
    let mut rng = seeded(seed);
    random_configuration_with(d, n, weighted, &mut rng)
}

pub fn random_configuration_with<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    weighted: bool,
    rng: &mut R,
) -> Result<DiscreteMeasure> {
    if d < 1 || n < 1 {
        return Err(Error::InvalidArgument("need d >= 1 and N >= 1".into()));
    }
    let points: Vec<SpherePoint> = (0..n).map(|_| SpherePoint::random(d, rng)).collect();
    let weights = if weighted {
        flat_dirichlet(n, rng)
    } else {
        vec![1.0; n]
    };
    DiscreteMeasure::new(points, weights)
}

/// Sample from the symmetric Dirichlet(1, ..., 1) distribution.
pub fn flat_dirichlet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.into_iter().map(|w| w / total).collect();
        }
    }
}

/// Representative of a projective point: the coordinate of largest magnitude
/// (lowest index on ties) is made positive.
pub fn canonical_sign(p: &SpherePoint) -> SpherePoint {
    let c = p.coords();
    let mut best = 0;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    if c[best] < 0.0 {
        p.antipode()
    } else {
        p.clone()
    }
}

/// Canonicalizes signs and merges atoms within projective distance `tol`
/// of an earlier representative.
pub fn merge_projective(mu: &DiscreteMeasure, tol: f64) -> DiscreteMeasure {
    let mut reps: Vec<Atom> = Vec::with_capacity(mu.len());
    for atom in mu.atoms() {
        let p = canonical_sign(&atom.point);
        match reps
            .iter_mut()
            .find(|r| projective_rho_raw(r.point.coords(), p.coords()) <= tol)
        {
            Some(r) => r.weight += atom.weight,
            None => reps.push(Atom {
                point: p,
                weight: atom.weight,
            }),
        }
    }
    DiscreteMeasure {
        dim: mu.dim(),
        atoms: reps,
    }
}

/// Canonical projection onto RP^d: antipodal and coincident atoms merged.
pub fn project_to_rp(mu: &DiscreteMeasure) -> DiscreteMeasure {
    merge_projective(mu, MERGE_TOL)
}

fn pairwise_orthogonal(points: &[&SpherePoint], tol: f64) -> bool {
    points.iter().enumerate().all(|(i, a)| {
        points[i + 1..]
            .iter()
            .all(|b| dot(a.coords(), b.coords()).abs() <= tol)
    })
}

/// Classifies `mu` after projection to RP^d.
pub fn classify(mu: &DiscreteMeasure, tol: f64) -> MeasureClass {
    let proj = project_to_rp(mu);
    let points: Vec<&SpherePoint> = proj.points().collect();
    if points.len() == mu.dim() + 1 && pairwise_orthogonal(&points, tol) {
        return if proj.is_uniform(tol) {
            MeasureClass::PDeltaEq
        } else {
            MeasureClass::PDelta
        };
    }
    if proj.is_uniform(tol) {
        MeasureClass::PNEq
    } else {
        MeasureClass::Other
    }
}

/// Like [`classify`] but on the sphere itself: reports `POn`/`POnEq` only
/// when the raw support (no antipodal identification) is an orthonormal
/// basis.
pub fn classify_on_sphere(mu: &DiscreteMeasure, tol: f64) -> MeasureClass {
    let points: Vec<&SpherePoint> = mu.points().collect();
    if points.len() == mu.dim() + 1 && pairwise_orthogonal(&points, tol) {
        return if mu.is_uniform(tol) {
            MeasureClass::POnEq
        } else {
            MeasureClass::POn
        };
    }
    classify(mu, tol)
}
