//! Empirical constant in the lower bound `F(x) ≥ C ρ(x, x̄)` for the summed
//! recentered potentials `F(x) = Σ_i ∫ (1 - Λ(x, y)) dν_i(y)` near e_0.

use std::f64::consts::FRAC_2_PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exp_map, lambda_raw, projective_rho_raw, random_tangent_in_ball, rho_raw, SpherePoint, TangentVector};
use crate::measures::DiscreteMeasure;
use crate::rng::stream;

/// Sample points closer than this to x̄ are left out of the quotient.
pub const EXCLUSION_RADIUS: f64 = 1e-8;

/// Pattern-search step at which x̄ counts as located.
pub const LOCATE_TOL: f64 = 1e-10;

const EXTRA_STARTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub xbar: SpherePoint,
    pub c_empirical: f64,
    pub c_target: f64,
    pub r: f64,
    pub sample_count: usize,
    /// `F(x̄)`; nonnegative because Λ ≤ 1.
    pub f_at_xbar: f64,
}

impl AggregationReport {
    pub fn passes(&self) -> bool {
        self.c_empirical >= self.c_target
    }
}

struct Objective<'a> {
    nus: &'a [DiscreteMeasure],
    e0: SpherePoint,
    r: f64,
}

impl Objective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.nus
            .iter()
            .map(|nu| {
                nu.atoms()
                    .iter()
                    .map(|a| a.weight * (1.0 - lambda_raw(x, a.point.coords())))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Point of the cap with tangent coordinates `v` at e_0, pulled back
    /// onto the closed cap if needed.
    fn point(&self, v: &[f64]) -> SpherePoint {
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let scale = if len > self.r { self.r / len } else { 1.0 };
        let mut full = vec![0.0];
        full.extend(v.iter().map(|c| c * scale));
        let t = TangentVector::new(self.e0.clone(), full).expect("dimension fixed");
        exp_map(&t).expect("cap radius below π")
    }

    /// Compass search in tangent coordinates from `start`.
    fn descend(&self, start: Vec<f64>, dirs: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let mut v = start;
        let mut best = self.value(self.point(&v).coords());
        let mut step = self.r / 4.0;
        while step > LOCATE_TOL {
            let mut improved = false;
            for dir in dirs {
                for sign in [1.0, -1.0] {
                    let trial: Vec<f64> = v.iter().zip(dir).map(|(a, b)| a + sign * step * b).collect();
                    let f = self.value(self.point(&trial).coords());
                    if f < best {
                        best = f;
                        v = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (v, best)
    }
}

/// `nu_list[i - 1]` must live in the cap of radius `r` around e_i
/// (projectively), for i = 1..d with d = `nu_list.len()`.
pub fn aggregation_constant(
    nu_list: &[DiscreteMeasure],
    r: f64,
    c_target: f64,
    sample_count: usize,
    seed: u64,
) -> Result<AggregationReport> {
    let d = nu_list.len();
    if d < 1 {
        return Err(Error::InvalidArgument("need at least one measure".into()));
    }
    if !(r > 0.0 && r < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!("need 0 < r < π/4, got {r}")));
    }
    if !(c_target > 0.0 && c_target < FRAC_2_PI) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < c_target < 2/π, got {c_target}"
        )));
    }
    for (i, nu) in nu_list.iter().enumerate() {
        if nu.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: nu.dim(),
            });
        }
        let e = SpherePoint::basis(d, i + 1)?;
        if let Some(p) = nu
            .points()
            .find(|p| projective_rho_raw(p.coords(), e.coords()) > r)
        {
            return Err(Error::Precondition(format!(
                "atom {:?} of measure {} lies outside the cap around e_{}",
                p.coords(),
                i + 1,
                i + 1
            )));
        }
    }

    let objective = Objective {
        nus: nu_list,
        e0: SpherePoint::basis(d, 0)?,
        r,
    };
    let mut rng = stream(seed, 0);
    let mut dirs: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..d).map(|j| f64::from(u8::from(j == k))).collect())
        .collect();
    for _ in 0..2 * d {
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let len = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 0.0 {
            dirs.push(raw.into_iter().map(|c| c / len).collect());
        }
    }
    let mut starts = vec![vec![0.0; d]];
    for _ in 0..EXTRA_STARTS {
        let t = random_tangent_in_ball(&objective.e0, r, &mut rng);
        starts.push(t.vec()[1..].to_vec());
    }
    let (xbar_v, f_at_xbar) = starts
        .into_iter()
        .map(|s| objective.descend(s, &dirs))
        .fold((vec![0.0; d], f64::INFINITY), |best, cand| {
            if cand.1 < best.1 {
                cand
            } else {
                best
            }
        });
    let xbar = objective.point(&xbar_v);

    let mut sampler = stream(seed, 1);
    let mut c_empirical = f64::INFINITY;
    for _ in 0..sample_count {
        let x = exp_map(&random_tangent_in_ball(&objective.e0, r, &mut sampler))?;
        let dist = rho_raw(x.coords(), xbar.coords());
        if dist > EXCLUSION_RADIUS {
            c_empirical = c_empirical.min(objective.value(x.coords()) / dist);
        }
    }
    Ok(AggregationReport {
        xbar,
        c_empirical,
        c_target,
        r,
        sample_count,
        f_at_xbar,
    })
}
