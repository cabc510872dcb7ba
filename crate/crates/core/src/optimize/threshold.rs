//! Bisection for the threshold exponent α_Δ(N) above which the Fejes Tóth
//! configuration ψ_N is the unique maximizer over N equal particles.
//!
//! Every verdict rests on a multistart local search, so the resulting
//! bracket is heuristic: a missed global maximum shows up as a spurious
//! "above".

use serde::{Deserialize, Serialize};

use super::{maximize_particles, AscentOptions};
use crate::energy::{conjectured_value, Convention, Particles};
use crate::equivalence::essentially_equivalent;
use crate::error::{Error, Result};
use crate::measures::{fejes_toth_config, merge_projective};

/// Energy margin separating "beats ψ_N" from "ties ψ_N".
pub const VERDICT_MARGIN: f64 = 1e-7;

/// Tolerance for atom merging and essential equivalence in verdicts.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// ψ_N is beaten or tied by an inequivalent configuration.
    Below,
    /// ψ_N is the best configuration found.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSample {
    pub alpha: f64,
    pub best_found_energy: f64,
    pub conjectured: f64,
    pub verdict: Verdict,
    /// Within the margin of ψ_N but not equivalent to it.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub d: usize,
    pub n: usize,
    /// `(alpha_lo, alpha_hi)`; `alpha_hi` may be infinite when ψ_N was
    /// beaten at every tested exponent.
    pub bracket: (f64, f64),
    pub samples: Vec<ThresholdSample>,
    pub tolerance: f64,
    /// Inconsistencies met during the scan.
    pub flags: Vec<String>,
}

/// Runs the particle ascent at one exponent and compares with ψ_N.
pub fn threshold_verdict(d: usize, n: usize, alpha: f64, opts: &AscentOptions) -> Result<ThresholdSample> {
    let conjectured = conjectured_value(d, Particles::Finite(n), Convention::Half)?;
    let result = maximize_particles(d, n, alpha, opts)?;
    let best = result.best_energy;
    let (verdict, tie) = if best > conjectured + VERDICT_MARGIN {
        (Verdict::Below, false)
    } else if best < conjectured - VERDICT_MARGIN {
        // the search fell short of ψ_N, which stays the best known
        (Verdict::Above, false)
    } else {
        let merged = merge_projective(&result.best, EQUIVALENCE_TOL);
        let target = fejes_toth_config(d, n)?;
        let same = essentially_equivalent(&merged, &target, EQUIVALENCE_TOL)?.equivalent;
        if same {
            (Verdict::Above, false)
        } else {
            (Verdict::Below, true)
        }
    };
    Ok(ThresholdSample {
        alpha,
        best_found_energy: best,
        conjectured,
        verdict,
        tie,
    })
}

/// Brackets α_Δ(N) by bisection on the verdict of [`threshold_verdict`].
pub fn estimate_threshold(
    d: usize,
    n: usize,
    alpha_lo: f64,
    alpha_hi: f64,
    alpha_tol: f64,
    opts: &AscentOptions,
) -> Result<ThresholdEstimate> {
    opts.validate()?;
    if !(alpha_lo > 0.0 && alpha_lo < alpha_hi && alpha_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < alpha_lo < alpha_hi < ∞, got ({alpha_lo}, {alpha_hi})"
        )));
    }
    if !(alpha_tol > 0.0) {
        return Err(Error::InvalidArgument("alpha_tol must be positive".into()));
    }
    if d < 1 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let mut estimate = ThresholdEstimate {
        d,
        n,
        bracket: (0.0, alpha_lo),
        samples: Vec::new(),
        tolerance: alpha_tol,
        flags: Vec::new(),
    };
    if n <= d + 1 {
        // orthogonal particles are optimal for every α > 0
        return Ok(estimate);
    }

    let (mut lo, mut hi) = (alpha_lo, alpha_hi);
    let mut widened = false;
    loop {
        let at_lo = threshold_verdict(d, n, lo, opts)?;
        let at_hi = threshold_verdict(d, n, hi, opts)?;
        let (v_lo, v_hi) = (at_lo.verdict, at_hi.verdict);
        estimate.samples.push(at_lo);
        estimate.samples.push(at_hi);
        match (v_lo, v_hi) {
            (Verdict::Below, Verdict::Above) => break,
            (Verdict::Above, Verdict::Above) => {
                estimate.bracket = (0.0, lo);
                return Ok(estimate);
            }
            (Verdict::Below, Verdict::Below) => {
                estimate.bracket = (hi, f64::INFINITY);
                return Ok(estimate);
            }
            (Verdict::Above, Verdict::Below) => {
                let note = format!("verdict below at α = {hi} after above at α = {lo}");
                if widened {
                    return Err(Error::InconsistentVerdicts(note));
                }
                estimate.flags.push(note);
                widened = true;
                lo /= 2.0;
                hi *= 2.0;
            }
        }
    }

    while hi - lo > alpha_tol {
        let mid = 0.5 * (lo + hi);
        let sample = threshold_verdict(d, n, mid, opts)?;
        match sample.verdict {
            Verdict::Below => lo = mid,
            Verdict::Above => hi = mid,
        }
        estimate.samples.push(sample);
    }
    estimate.bracket = (lo, hi);
    Ok(estimate)
}
