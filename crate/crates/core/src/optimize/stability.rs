//! Random perturbations of a measure on d+1 orthogonal lines inside a small
//! d_∞ ball, checking that none of them gains energy.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, Convention};
use crate::equivalence::is_in_pdelta;
use crate::error::{Error, Result};
use crate::geometry::{exp_map, random_tangent_in_ball, KernelSpec, SpherePoint};
use crate::measures::{flat_dirichlet, DiscreteMeasure};
use crate::rng::stream;

/// Energy gain above which a trial counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `E(ξ) - E(ξ̂)` observed; negative when every trial lost energy.
    pub max_energy_gain: f64,
    pub radius: f64,
    pub alpha: f64,
}

/// Splits every atom into up to `k_split` fragments and moves each by less
/// than `r`, so the fragment coupling keeps `d_∞(ξ, ξ̂) < r`.
fn perturb<R: Rng>(xi_hat: &DiscreteMeasure, r: f64, k_split: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    let mut points: Vec<SpherePoint> = Vec::new();
    let mut weights = Vec::new();
    for atom in xi_hat.atoms() {
        let k = rng.random_range(1..=k_split);
        let split = flat_dirichlet(k, rng);
        for share in split {
            let v = random_tangent_in_ball(&atom.point, r, rng);
            points.push(exp_map(&v)?);
            weights.push(atom.weight * share);
        }
    }
    DiscreteMeasure::new(points, weights)
}

pub fn stability_experiment(
    xi_hat: &DiscreteMeasure,
    alpha: f64,
    r: f64,
    k_split: usize,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if !is_in_pdelta(xi_hat, super::ORTHOGONAL_SUPPORT_TOL) {
        return Err(Error::Precondition(
            "xi_hat must sit on d+1 pairwise orthogonal lines".into(),
        ));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::Precondition(format!("need finite alpha > 1, got {alpha}")));
    }
    if !(0.0..std::f64::consts::FRAC_PI_4).contains(&r) {
        return Err(Error::Precondition(format!("need 0 <= r < π/4, got {r}")));
    }
    if k_split < 1 {
        return Err(Error::Precondition("k_split must be at least 1".into()));
    }
    let spec = KernelSpec::lambda(alpha)?;
    let base = energy(&spec, xi_hat, Convention::Half)?.value;
    let gains = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, t as u64);
            let xi = perturb(xi_hat, r, k_split, &mut rng)?;
            Ok(energy(&spec, &xi, Convention::Half)?.value - base)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(StabilityReport {
        trials,
        violations: gains.iter().filter(|g| **g > VIOLATION_TOL).count(),
        max_energy_gain: gains.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        radius: r,
        alpha,
    })
}
