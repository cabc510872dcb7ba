//! Essential equivalence: equality of measures on RP^d up to an orthogonal
//! transformation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{dot, projective_rho_raw};
use crate::measures::{project_to_rp, DiscreteMeasure};

/// Largest projected atom count accepted by [`essentially_equivalent`].
pub const ATOM_GUARD: usize = 64;

/// Sign patterns are enumerated exhaustively up to this many atoms.
pub const SIGN_ENUMERATION_MAX: usize = 16;

const MATCHING_BUDGET: usize = 200_000;

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceWitness {
    pub equivalent: bool,
    /// Orthogonal map taking the projected `mu` onto the projected `nu`.
    pub rotation: Option<DMatrix<f64>>,
    /// `(i, j)`: atom `i` of `project_to_rp(mu)` goes to atom `j` of
    /// `project_to_rp(nu)`.
    pub atom_matching: Option<Vec<(usize, usize)>>,
    /// Largest projective displacement between matched atoms.
    pub residual: f64,
}

impl EquivalenceWitness {
    fn rejected(residual: f64) -> Self {
        Self {
            equivalent: false,
            rotation: None,
            atom_matching: None,
            residual,
        }
    }
}

struct Projected {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dist: Vec<Vec<f64>>,
}

impl Projected {
    fn new(mu: &DiscreteMeasure) -> Self {
        let proj = project_to_rp(mu);
        let points: Vec<Vec<f64>> = proj.points().map(|p| p.coords().to_vec()).collect();
        let dist = points
            .iter()
            .map(|a| points.iter().map(|b| projective_rho_raw(a, b)).collect())
            .collect();
        Self {
            points,
            weights: proj.weights(),
            dist,
        }
    }

    fn profile(&self, i: usize) -> Vec<f64> {
        let mut row = self.dist[i].clone();
        row.sort_by(f64::total_cmp);
        row
    }
}

struct Alignment {
    rotation: DMatrix<f64>,
    residual: f64,
}

fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

/// Orthogonal Procrustes for fixed signs: the R ∈ O(d+1) maximizing
/// Σ w_i s_i y_iᵀ R x_i. The SVD comes from faer; nalgebra's loses
/// accuracy on some rank-deficient inputs.
fn procrustes(xs: &[&[f64]], ys: &[&[f64]], w: &[f64], signs: &[f64]) -> DMatrix<f64> {
    let n = xs[0].len();
    let h = faer::Mat::<f64>::from_fn(n, n, |i, j| {
        (0..xs.len()).map(|k| w[k] * signs[k] * ys[k][i] * xs[k][j]).sum()
    });
    match h.svd() {
        Ok(svd) => {
            let r = svd.U() * svd.V().transpose();
            DMatrix::from_fn(n, n, |i, j| r[(i, j)])
        }
        // no convergence: the caller's misfit check rejects the identity
        Err(_) => DMatrix::identity(n, n),
    }
}

fn apply(r: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (r * column(x)).iter().copied().collect()
}

/// Weighted squared projective misfit and the largest displacement.
fn misfit(r: &DMatrix<f64>, xs: &[&[f64]], ys: &[&[f64]], w: &[f64]) -> (f64, f64) {
    let mut sq = 0.0;
    let mut worst = 0.0f64;
    for k in 0..xs.len() {
        let d = projective_rho_raw(&apply(r, xs[k]), ys[k]);
        sq += w[k] * d * d;
        worst = worst.max(d);
    }
    (sq, worst)
}

fn align(xs: &[&[f64]], ys: &[&[f64]], w: &[f64]) -> Alignment {
    let k = xs.len();
    let mut best: Option<(f64, Alignment)> = None;
    let mut consider = |signs: &[f64]| {
        let r = procrustes(xs, ys, w, signs);
        let (sq, worst) = misfit(&r, xs, ys, w);
        if best.as_ref().is_none_or(|(b, _)| sq < *b) {
            best = Some((
                sq,
                Alignment {
                    rotation: r,
                    residual: worst,
                },
            ));
        }
    };
    if k <= SIGN_ENUMERATION_MAX {
        // the global sign is immaterial, so atom 0 keeps +1
        for mask in 0u32..(1u32 << (k - 1)) {
            let signs: Vec<f64> = (0..k)
                .map(|i| {
                    if i > 0 && mask & (1 << (i - 1)) != 0 {
                        -1.0
                    } else {
                        1.0
                    }
                })
                .collect();
            consider(&signs);
        }
    } else {
        // signs read off inner products with atom 0, then refined
        let mut signs: Vec<f64> = (0..k)
            .map(|i| {
                let (a, b) = (dot(xs[0], xs[i]), dot(ys[0], ys[i]));
                if a * b < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        for _ in 0..50 {
            let r = procrustes(xs, ys, w, &signs);
            let next: Vec<f64> = (0..k)
                .map(|i| if dot(&apply(&r, xs[i]), ys[i]) < 0.0 { -1.0 } else { 1.0 })
                .collect();
            if next == signs {
                break;
            }
            signs = next;
        }
        consider(&signs);
    }
    best.expect("at least one sign pattern").1
}

/// Decides whether `mu` and `nu` coincide on RP^d up to an orthogonal map.
pub fn essentially_equivalent(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<EquivalenceWitness> {
    mu.check_same_dim(nu)?;
    let (a, b) = (Projected::new(mu), Projected::new(nu));
    for (name, p) in [("mu", &a), ("nu", &b)] {
        if p.points.len() > ATOM_GUARD {
            return Err(Error::TooLarge(format!(
                "{name} has {} projective atoms (limit {ATOM_GUARD})",
                p.points.len()
            )));
        }
    }
    let k = a.points.len();
    if k != b.points.len() {
        return Ok(EquivalenceWitness::rejected(f64::INFINITY));
    }

    // same atoms in the same order
    let identity_fit = (0..k)
        .map(|i| {
            if (a.weights[i] - b.weights[i]).abs() > tol {
                f64::INFINITY
            } else {
                projective_rho_raw(&a.points[i], &b.points[i])
            }
        })
        .fold(0.0, f64::max);
    if identity_fit <= tol {
        let n = mu.dim() + 1;
        return Ok(EquivalenceWitness {
            equivalent: true,
            rotation: Some(DMatrix::identity(n, n)),
            atom_matching: Some((0..k).map(|i| (i, i)).collect()),
            residual: identity_fit,
        });
    }

    let profiles_b: Vec<Vec<f64>> = (0..k).map(|j| b.profile(j)).collect();
    let candidates: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            let pa = a.profile(i);
            (0..k)
                .filter(|&j| {
                    (a.weights[i] - b.weights[j]).abs() <= tol
                        && pa
                            .iter()
                            .zip(&profiles_b[j])
                            .all(|(x, y)| (x - y).abs() <= tol)
                })
                .collect()
        })
        .collect();
    if candidates.iter().any(|c| c.is_empty()) {
        return Ok(EquivalenceWitness::rejected(f64::INFINITY));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| (candidates[i].len(), i));

    let mut search = Search {
        a: &a,
        b: &b,
        tol,
        order,
        candidates,
        assigned: vec![usize::MAX; k],
        used: vec![false; k],
        best_residual: f64::INFINITY,
        visited: 0,
        found: None,
    };
    search.descend(0);
    if search.visited > MATCHING_BUDGET && search.found.is_none() {
        return Err(Error::TooLarge(
            "matching search budget exhausted".into(),
        ));
    }
    Ok(match search.found {
        Some((matching, alignment)) => EquivalenceWitness {
            equivalent: true,
            rotation: Some(alignment.rotation),
            atom_matching: Some(matching),
            residual: alignment.residual,
        },
        None => EquivalenceWitness::rejected(search.best_residual),
    })
}

struct Search<'a> {
    a: &'a Projected,
    b: &'a Projected,
    tol: f64,
    order: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    assigned: Vec<usize>,
    used: Vec<bool>,
    best_residual: f64,
    visited: usize,
    found: Option<(Vec<(usize, usize)>, Alignment)>,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) {
        if self.found.is_some() || self.visited > MATCHING_BUDGET {
            return;
        }
        self.visited += 1;
        let k = self.order.len();
        if depth == k {
            self.try_alignment();
            return;
        }
        let i = self.order[depth];
        for c in 0..self.candidates[i].len() {
            let j = self.candidates[i][c];
            if self.used[j] {
                continue;
            }
            let consistent = self.order[..depth].iter().all(|&prev| {
                let pj = self.assigned[prev];
                (self.a.dist[i][prev] - self.b.dist[j][pj]).abs() <= self.tol
            });
            if !consistent {
                continue;
            }
            self.assigned[i] = j;
            self.used[j] = true;
            self.descend(depth + 1);
            self.used[j] = false;
            self.assigned[i] = usize::MAX;
            if self.found.is_some() {
                return;
            }
        }
    }

    fn try_alignment(&mut self) {
        let k = self.order.len();
        let xs: Vec<&[f64]> = (0..k).map(|i| self.a.points[i].as_slice()).collect();
        let ys: Vec<&[f64]> = (0..k)
            .map(|i| self.b.points[self.assigned[i]].as_slice())
            .collect();
        let alignment = align(&xs, &ys, &self.a.weights);
        self.best_residual = self.best_residual.min(alignment.residual);
        if alignment.residual <= self.tol {
            let matching = (0..k).map(|i| (i, self.assigned[i])).collect();
            self.found = Some((matching, alignment));
        }
    }
}

/// True when, after projection, the support consists of exactly d+1
/// pairwise orthogonal lines carrying positive mass.
pub fn is_in_pdelta(mu: &DiscreteMeasure, tol: f64) -> bool {
    let proj = project_to_rp(mu);
    if proj.len() != mu.dim() + 1 || proj.atoms().iter().any(|a| a.weight <= 0.0) {
        return false;
    }
    let pts: Vec<&[f64]> = proj.points().map(|p| p.coords()).collect();
    pts.iter()
        .enumerate()
        .all(|(i, x)| pts[i + 1..].iter().all(|y| dot(x, y).abs() <= tol))
}
