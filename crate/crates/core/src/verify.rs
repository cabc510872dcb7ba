//! Numerical checks of the majorization `f_α ≤ g` for α ≥ 2 and of the
//! second-moment identities behind the energy bound.

use std::f64::consts::FRAC_2_PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, Convention};
use crate::error::{Error, Result};
use crate::geometry::{KernelSpec, SpherePoint};
use crate::measures::DiscreteMeasure;
use crate::rng::seeded;

/// Gaps at or above this count as nonnegative.
pub const GAP_TOL: f64 = 1e-12;

/// `|h| ≤ EQUALITY_TOL` counts as equality.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Equality is allowed only this close to {-1, 0, 1}.
pub const EQUALITY_WINDOW: f64 = 1e-6;

/// Reported violations must come this close to |t| = 1.
pub const ENDPOINT_WINDOW: f64 = 0.05;

/// Tightness tolerance for `Tr I² = 1/(d+1)`.
pub const TIGHT_TOL: f64 = 1e-9;

/// Tolerance of the identity `E_g = 1 - Tr I²` and of the chain.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Chain members within this of each other count as equal.
pub const CHAIN_EQUAL_TOL: f64 = 1e-9;

/// Second-moment matrix `I(μ) = Σ_k w_k x_k x_kᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `Tr(I²)`, the squared Frobenius norm of a symmetric matrix.
    pub fn trace_squared(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub fn moment_matrix(mu: &DiscreteMeasure) -> MomentMatrix {
    let n = mu.dim() + 1;
    let mut m = DMatrix::zeros(n, n);
    for a in mu.atoms() {
        let x = a.point.coords();
        for i in 0..n {
            for j in i..n {
                m[(i, j)] += a.weight * x[i] * x[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    MomentMatrix { entries: m }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationReport {
    pub alpha: f64,
    pub grid_size: usize,
    /// Smallest `h(t) = (1 - t²) - ((2/π) arccos|t|)^α` found.
    pub min_gap: f64,
    /// Where `min_gap` is attained (the positive representative).
    pub worst_t: f64,
    /// Points with `|h| ≤ 1e-9` up to sign, one per cluster of samples.
    pub equality_points: Vec<f64>,
    /// Some negative gap lies within 0.05 of |t| = 1.
    pub violation_near_endpoint: bool,
    pub pass: bool,
}

/// `h` as a function of `s = |t|`, given also `eps = 1 - s` so that the
/// neighbourhood of |t| = 1 keeps full relative precision.
fn gap(alpha: f64, s: f64, eps: f64) -> f64 {
    let g = if eps < 0.5 { eps * (2.0 - eps) } else { 1.0 - s * s };
    // arccos(s) = 2 asin(sqrt((1 - s)/2)) keeps precision near s = 1
    let angle = if eps < 0.5 { 2.0 * (0.5 * eps).sqrt().asin() } else { s.acos() };
    g - (FRAC_2_PI * angle).powf(alpha)
}

/// `(s, eps)` pairs: a uniform grid on [0, 1] (h is even) plus geometric
/// refinements towards 0 and 1, where the interesting zeros sit.
fn sample_points(grid_size: usize) -> Vec<(f64, f64)> {
    let half = grid_size / 2;
    let mut pts: Vec<(f64, f64)> = (0..=half)
        .map(|k| {
            let s = k as f64 / half as f64;
            let eps = (half - k) as f64 / half as f64;
            (s, eps)
        })
        .collect();
    for j in 1..=160 {
        let tiny = 10f64.powf(-(j as f64) / 8.0);
        pts.push((1.0 - tiny, tiny));
        pts.push((tiny, 1.0 - tiny));
    }
    pts
}

/// One representative per run of consecutive (in |t|) near-zero gaps: the
/// sample with the smallest |h|.
fn equality_clusters(pts: &[(f64, f64)], gaps: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    // near |t| = 1 several samples round to s = 1.0; eps still orders them
    order.sort_by(|&a, &b| pts[a].0.total_cmp(&pts[b].0).then(pts[b].1.total_cmp(&pts[a].1)));
    let mut out = Vec::new();
    let mut current: Option<usize> = None;
    for k in order {
        if gaps[k].abs() <= EQUALITY_TOL {
            current = match current {
                Some(c) if gaps[c].abs() <= gaps[k].abs() => Some(c),
                _ => Some(k),
            };
        } else if let Some(c) = current.take() {
            out.push(pts[c].0);
        }
    }
    out.extend(current.map(|c| pts[c].0));
    out
}

pub fn majorization_check(alpha: f64, grid_size: usize) -> Result<MajorizationReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite alpha > 0, got {alpha}")));
    }
    if grid_size < 1000 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be at least 1000, got {grid_size}"
        )));
    }
    let pts = sample_points(grid_size);
    let gaps: Vec<f64> = pts.par_iter().map(|&(s, eps)| gap(alpha, s, eps)).collect();
    let mut worst = 0;
    for (k, h) in gaps.iter().enumerate() {
        if *h < gaps[worst] {
            worst = k;
        }
    }
    let equality_points = equality_clusters(&pts, &gaps);
    let equality_ok = pts
        .iter()
        .zip(&gaps)
        .filter(|(_, h)| h.abs() <= EQUALITY_TOL)
        .all(|((s, eps), _)| *s <= EQUALITY_WINDOW || *eps <= EQUALITY_WINDOW);
    let violation_near_endpoint = pts
        .iter()
        .zip(&gaps)
        .any(|((_, eps), h)| *h < -GAP_TOL && *eps <= ENDPOINT_WINDOW);
    let min_gap = gaps[worst];
    Ok(MajorizationReport {
        alpha,
        grid_size,
        min_gap,
        worst_t: pts[worst].0,
        equality_points,
        violation_near_endpoint,
        pass: min_gap >= -GAP_TOL && equality_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub tr_i2: f64,
    pub lower_bound: f64,
    pub tight: bool,
    /// `E_g(μ)` in the Plain convention, computed pairwise.
    pub e_g: f64,
    /// `|E_g(μ) - (1 - Tr I²)| ≤ 1e-12`.
    pub identity_holds: bool,
}

pub fn frame_bound_check(mu: &DiscreteMeasure) -> Result<FrameReport> {
    let tr_i2 = moment_matrix(mu).trace_squared();
    let lower_bound = 1.0 / (mu.dim() + 1) as f64;
    let e_g = energy(&KernelSpec::quadratic(), mu, Convention::Plain)?.value;
    Ok(FrameReport {
        tr_i2,
        lower_bound,
        tight: (tr_i2 - lower_bound).abs() <= TIGHT_TOL,
        e_g,
        identity_holds: (e_g - (1.0 - tr_i2)).abs() <= IDENTITY_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub alpha: f64,
    /// `E_{f_α}(μ)`, Plain convention.
    pub e_f: f64,
    pub e_g: f64,
    /// `E_g(σ) = d/(d+1)`.
    pub e_g_sigma: f64,
    pub pass: bool,
    /// All three values agree within 1e-9.
    pub all_equal: bool,
}

/// `E_{f_α}(μ) ≤ E_g(μ) ≤ E_g(σ)`, valid for α ≥ 2.
pub fn chain_check(mu: &DiscreteMeasure, alpha: f64) -> Result<ChainReport> {
    if !(alpha >= 2.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "the chain is only claimed for finite alpha ≥ 2, got {alpha}"
        )));
    }
    let e_f = energy(&KernelSpec::lambda(alpha)?, mu, Convention::Plain)?.value;
    let e_g = energy(&KernelSpec::quadratic(), mu, Convention::Plain)?.value;
    let d = mu.dim() as f64;
    let e_g_sigma = d / (d + 1.0);
    Ok(ChainReport {
        alpha,
        e_f,
        e_g,
        e_g_sigma,
        pass: e_f <= e_g + IDENTITY_TOL && e_g <= e_g_sigma + IDENTITY_TOL,
        all_equal: (e_f - e_g).abs() <= CHAIN_EQUAL_TOL && (e_g - e_g_sigma).abs() <= CHAIN_EQUAL_TOL,
    })
}

/// Moments of `n` uniform samples on S^d with Monte-Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloMoments {
    pub samples: usize,
    pub moments: MomentMatrix,
    /// Standard error of each entry of `moments`.
    pub entry_std_errors: DMatrix<f64>,
    /// Plug-in `Tr(Î²)`; biased upward by `(1 - Tr I²)/n`.
    pub tr_i2: f64,
    /// Unbiased pair estimate `(n² Tr(Î²) - n) / (n(n-1))`.
    pub tr_i2_unbiased: f64,
    /// Standard error of the pair estimate from its Hoeffding
    /// decomposition; also the fluctuation scale of the plug-in.
    pub tr_i2_std_error: f64,
}

/// Samples σ on S^d and estimates `I(σ)` and `Tr(I(σ)²)`.
pub fn sample_uniform_moments(d: usize, n: usize, seed: u64) -> Result<MonteCarloMoments> {
    if d < 1 || n < 2 {
        return Err(Error::InvalidArgument("need d ≥ 1 and at least two samples".into()));
    }
    let mut rng = seeded(seed);
    let pts: Vec<SpherePoint> = (0..n).map(|_| SpherePoint::random(d, &mut rng)).collect();
    let dim = d + 1;
    let nf = n as f64;
    let mu = DiscreteMeasure::uniform(pts)?;
    let moments = moment_matrix(&mu);
    let m = &moments.entries;

    let mut second = DMatrix::<f64>::zeros(dim, dim);
    for p in mu.points() {
        let x = p.coords();
        for i in 0..dim {
            for j in 0..dim {
                second[(i, j)] += (x[i] * x[j]).powi(2) / nf;
            }
        }
    }
    let entry_std_errors = DMatrix::from_fn(dim, dim, |i, j| {
        ((second[(i, j)] - m[(i, j)].powi(2)).max(0.0) / (nf - 1.0)).sqrt()
    });

    let tr_i2 = moments.trace_squared();
    let tr_i2_unbiased = (nf * nf * tr_i2 - nf) / (nf * (nf - 1.0));
    // E[(x·y)^4] = |M4|² with M4 the empirical fourth-moment tensor
    let mut m4 = vec![0.0; dim.pow(4)];
    for p in mu.points() {
        let x = p.coords();
        let mut k = 0;
        for a in x {
            for b in x {
                for c in x {
                    for e in x {
                        m4[k] += a * b * c * e / nf;
                        k += 1;
                    }
                }
            }
        }
    }
    let fourth: f64 = m4.iter().map(|v| v * v).sum();
    let var_h2 = (fourth - tr_i2_unbiased.powi(2)).max(0.0);
    // first-order term h1(x) = xᵀ I x, estimated leave-one-out; the spread
    // of those estimates carries var_h2/(n-1) of sampling noise
    let h1: Vec<f64> = mu
        .points()
        .map(|p| {
            let x = p.coords();
            let q: f64 = (0..dim)
                .map(|i| (0..dim).map(|j| x[i] * m[(i, j)] * x[j]).sum::<f64>())
                .sum();
            (nf * q - 1.0) / (nf - 1.0)
        })
        .collect();
    let h1_mean = h1.iter().sum::<f64>() / nf;
    let spread = h1.iter().map(|v| (v - h1_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let var_h1 = (spread - var_h2 / (nf - 1.0)).max(0.0);
    let tr_i2_std_error = (4.0 * var_h1 / nf + 2.0 * var_h2 / (nf * (nf - 1.0))).sqrt();

    Ok(MonteCarloMoments {
        samples: n,
        moments,
        entry_std_errors,
        tr_i2,
        tr_i2_unbiased,
        tr_i2_std_error,
    })
}
