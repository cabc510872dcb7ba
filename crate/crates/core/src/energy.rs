//! Energies, bilinear forms and potentials of discrete measures.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{grad_raw, KernelSpec, SpherePoint, TangentVector};
use crate::measures::DiscreteMeasure;
use crate::rng::seeded;

/// Above this many atoms, pair sums use compensated accumulation.
const KAHAN_THRESHOLD: usize = 1000;

/// Above this many atoms, rows of the pair sum are evaluated in parallel.
const PARALLEL_THRESHOLD: usize = 256;

/// Normalization of the double integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `½ ∬ K dμ dμ`.
    Half,
    /// `∬ K dμ dμ`.
    Plain,
}

impl Convention {
    fn scale(self) -> f64 {
        match self {
            Convention::Half => 1.0,
            Convention::Plain => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub convention: Convention,
    pub kernel: KernelSpec,
}

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

fn accumulate(values: impl Iterator<Item = f64>, compensated: bool) -> f64 {
    if compensated {
        let mut acc = Kahan::default();
        values.for_each(|v| acc.add(v));
        acc.sum
    } else {
        values.sum()
    }
}

/// Row sums reduced in index order, so the result does not depend on the
/// thread count.
fn ordered_rows<F>(rows: usize, compensated: bool, row: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if rows >= PARALLEL_THRESHOLD {
        let partial: Vec<f64> = (0..rows).into_par_iter().map(&row).collect();
        accumulate(partial.into_iter(), compensated)
    } else {
        accumulate((0..rows).map(row), compensated)
    }
}

/// `B(μ, ν) = Σ_i Σ_j w_i v_j K(x_i, y_j)`.
pub fn bilinear_form(spec: &KernelSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    spec.validate()?;
    mu.check_same_dim(nu)?;
    let compensated = mu.len().max(nu.len()) > KAHAN_THRESHOLD;
    let (a, b) = (mu.atoms(), nu.atoms());
    Ok(ordered_rows(a.len(), compensated, |i| {
        let x = a[i].point.coords();
        a[i].weight
            * accumulate(
                b.iter().map(|y| y.weight * spec.eval(x, y.point.coords())),
                compensated,
            )
    }))
}

/// Half the double sum, computed over unordered pairs.
fn half_self_energy(spec: &KernelSpec, mu: &DiscreteMeasure) -> f64 {
    let a = mu.atoms();
    let compensated = a.len() > KAHAN_THRESHOLD;
    ordered_rows(a.len(), compensated, |i| {
        let x = a[i].point.coords();
        let off = accumulate(
            a[..i]
                .iter()
                .map(|y| y.weight * spec.eval(x, y.point.coords())),
            compensated,
        );
        a[i].weight * (off + 0.5 * a[i].weight * spec.eval(x, x))
    })
}

/// Self-energy of `mu` in the requested convention.
pub fn energy(spec: &KernelSpec, mu: &DiscreteMeasure, convention: Convention) -> Result<EnergyReport> {
    spec.validate()?;
    Ok(EnergyReport {
        value: convention.scale() * half_self_energy(spec, mu),
        convention,
        kernel: *spec,
    })
}

/// Half-convention E_α shorthand.
pub fn energy_alpha(alpha: f64, mu: &DiscreteMeasure) -> Result<f64> {
    Ok(energy(&KernelSpec::lambda(alpha)?, mu, Convention::Half)?.value)
}

/// Number of particles in a conjectured optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particles {
    Finite(usize),
    Infinite,
}

/// Energy of the Fejes Tóth configuration ψ_N (or of the equidistributed
/// basis when N = ∞). Errors when N < d+1.
pub fn conjectured_value(d: usize, n: Particles, convention: Convention) -> Result<f64> {
    if let Particles::Finite(n) = n {
        if n < d + 1 {
            return Err(Error::Precondition(format!(
                "N = {n} < d + 1 = {}; use conjectured_value_unchecked",
                d + 1
            )));
        }
    }
    conjectured_value_unchecked(d, n, convention)
}

/// [`conjectured_value`] without the N ≥ d+1 guard.
pub fn conjectured_value_unchecked(d: usize, n: Particles, convention: Convention) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let half = match n {
        Particles::Infinite => d as f64 / (2.0 * d as f64 + 2.0),
        Particles::Finite(0) => {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        Particles::Finite(n) => {
            let (q, r) = ((n / (d + 1)) as f64, (n % (d + 1)) as f64);
            let n = n as f64;
            let same = r * (q + 1.0).powi(2) + (d as f64 + 1.0 - r) * q * q;
            (n * n - same) / (2.0 * n * n)
        }
    };
    Ok(convention.scale() * half)
}

/// `(K * μ)(x) = Σ_j w_j K(x, x_j)`.
pub fn potential(spec: &KernelSpec, mu: &DiscreteMeasure, x: &SpherePoint) -> Result<f64> {
    if x.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim() + 1,
            found: x.ambient_dim(),
        });
    }
    Ok(potential_raw(spec, mu, x.coords()))
}

pub(crate) fn potential_raw(spec: &KernelSpec, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
    mu.atoms()
        .iter()
        .map(|a| a.weight * spec.eval(x, a.point.coords()))
        .sum()
}

/// One-sided check that the support of `mu` lies in the argmax of its own
/// potential: `max(0, max_probe - min_support)`, where the probe set is the
/// support plus `probe_count` random points.
pub fn euler_lagrange_residual(
    spec: &KernelSpec,
    mu: &DiscreteMeasure,
    probe_count: usize,
    seed: u64,
) -> Result<f64> {
    if !spec.is_finite() {
        return Err(Error::InvalidKernel("residual needs a finite exponent".into()));
    }
    let support: Vec<f64> = mu
        .points()
        .map(|p| potential_raw(spec, mu, p.coords()))
        .collect();
    let min_support = support.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rng = seeded(seed);
    let probes: Vec<SpherePoint> = (0..probe_count)
        .map(|_| SpherePoint::random(mu.dim(), &mut rng))
        .collect();
    let max_probe = probes
        .par_iter()
        .map(|p| potential_raw(spec, mu, p.coords()))
        .collect::<Vec<_>>()
        .into_iter()
        .chain(support.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((max_probe - min_support).max(0.0))
}

/// Composite Simpson rule with `intervals` (even) subintervals.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Intervals per half of [0, π] in [`uniform_energy`].
const QUADRATURE_INTERVALS: usize = 50_000;

/// E_α(σ) for the uniform measure σ on S^d, by Simpson quadrature in the
/// polar angle (the integrand's kink at π/2 is a node).
pub fn uniform_energy(d: usize, alpha: f64, convention: Convention) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidKernel(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    let jac = |t: f64| t.sin().powi(d as i32 - 1);
    // Both factors are symmetric about π/2, so [0, π/2] suffices. The
    // substitution t = (π/2)u⁴ smooths the t^α singularity at 0.
    let num = simpson(
        |u| {
            let u3 = u * u * u;
            let t = FRAC_PI_2 * u3 * u;
            (u3 * u).powf(alpha) * jac(t) * 4.0 * FRAC_PI_2 * u3
        },
        0.0,
        1.0,
        QUADRATURE_INTERVALS,
    );
    let den = simpson(
        |u| {
            let u3 = u * u * u;
            jac(FRAC_PI_2 * u3 * u) * 4.0 * FRAC_PI_2 * u3
        },
        0.0,
        1.0,
        QUADRATURE_INTERVALS,
    );
    Ok(convention.scale() * 0.5 * num / den)
}

/// `max_{s ∈ [0,1]} |s^α - s^β|`; bounds `|B_α(μ,μ) - B_β(μ,μ)|` for every
/// probability measure.
pub fn kernel_sup_diff(alpha: f64, beta: f64) -> Result<f64> {
    for v in [alpha, beta] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "exponents must be positive and finite, got {v}"
            )));
        }
    }
    if alpha == beta {
        return Ok(0.0);
    }
    // interior stationary point of s^α - s^β; both endpoints give 0
    let s = (beta / alpha).powf(1.0 / (alpha - beta));
    Ok((s.powf(alpha) - s.powf(beta)).abs())
}

/// Gradient of the Half-convention energy with respect to each atom's
/// position, weights held fixed.
pub fn energy_gradient(spec: &KernelSpec, mu: &DiscreteMeasure) -> Result<Vec<TangentVector>> {
    if !spec.is_finite() {
        return Err(Error::InvalidKernel("gradient needs a finite exponent".into()));
    }
    gradient_raw(spec, mu)
        .into_iter()
        .zip(mu.points())
        .map(|(g, p)| TangentVector::new(p.clone(), g))
        .collect()
}

pub(crate) fn gradient_raw(spec: &KernelSpec, mu: &DiscreteMeasure) -> Vec<Vec<f64>> {
    let a = mu.atoms();
    let dim = mu.dim() + 1;
    let row = |i: usize| {
        let mut g = vec![0.0; dim];
        let x = a[i].point.coords();
        for (j, y) in a.iter().enumerate() {
            if j == i {
                continue;
            }
            let (gk, _) = grad_raw(spec, x, y.point.coords());
            let w = a[i].weight * y.weight;
            g.iter_mut().zip(&gk).for_each(|(acc, v)| *acc += w * v);
        }
        g
    };
    if a.len() >= PARALLEL_THRESHOLD {
        (0..a.len()).into_par_iter().map(row).collect()
    } else {
        (0..a.len()).map(row).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exp_map, random_orthogonal};
    use crate::measures::{equidistributed_basis, fejes_toth_config, random_configuration};
    use crate::rng::seeded;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn lam(alpha: f64) -> KernelSpec {
        KernelSpec::lambda(alpha).unwrap()
    }

    #[test]
    fn bilinear_examples() {
        let x = DiscreteMeasure::dirac(SpherePoint::basis(2, 0).unwrap());
        let y = DiscreteMeasure::dirac(SpherePoint::basis(2, 1).unwrap());
        assert_eq!(bilinear_form(&lam(3.0), &x, &y).unwrap(), 1.0);
        assert_eq!(bilinear_form(&lam(3.0), &x, &x).unwrap(), 0.0);
        let mu = equidistributed_basis(2).unwrap();
        for alpha in [0.5, 1.0, 2.0, 7.3] {
            let b = bilinear_form(&lam(alpha), &mu, &mu).unwrap();
            assert!((b - 6.0 / 9.0).abs() < 1e-15);
        }
        let z = DiscreteMeasure::dirac(SpherePoint::basis(1, 0).unwrap());
        assert!(bilinear_form(&lam(1.0), &x, &z).is_err());
    }

    #[test]
    fn energy_examples() {
        let mu = equidistributed_basis(2).unwrap();
        let e = energy(&lam(2.0), &mu, Convention::Half).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() < 1e-15);

        // ψ_3 on S^1: ordered pairs of distinct lines are 4 of 9, each Λ = 1
        let psi = fejes_toth_config(1, 3).unwrap();
        for alpha in [0.3, 1.0, 4.0] {
            let e = energy(&lam(alpha), &psi, Convention::Half).unwrap().value;
            assert!((e - 2.0 / 9.0).abs() < 1e-15);
        }

        for d in 1..5 {
            let mu = equidistributed_basis(d).unwrap();
            let e = energy(&KernelSpec::quadratic(), &mu, Convention::Plain).unwrap();
            assert!((e.value - d as f64 / (d as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn infinite_alpha_counts_orthogonal_pairs() {
        let inf = lam(f64::INFINITY);
        let mu = equidistributed_basis(3).unwrap();
        let e = energy(&inf, &mu, Convention::Half).unwrap().value;
        assert!((e - 3.0 / 8.0).abs() < 1e-15);
        let r = random_configuration(2, 5, 1, false).unwrap();
        assert_eq!(energy(&inf, &r, Convention::Half).unwrap().value, 0.0);
    }

    #[test]
    fn plain_is_twice_half() {
        for seed in 0..20 {
            let mu = random_configuration(2, 9, seed, true).unwrap();
            for spec in [lam(1.7), KernelSpec::quadratic()] {
                let h = energy(&spec, &mu, Convention::Half).unwrap().value;
                let p = energy(&spec, &mu, Convention::Plain).unwrap().value;
                assert_eq!(p, 2.0 * h);
            }
        }
    }

    #[test]
    fn energy_matches_bilinear_form() {
        let mu = random_configuration(3, 12, 77, true).unwrap();
        let spec = lam(2.5);
        let b = bilinear_form(&spec, &mu, &mu).unwrap();
        let e = energy(&spec, &mu, Convention::Half).unwrap().value;
        assert!((e - b / 2.0).abs() < 1e-15);
    }

    #[test]
    fn large_measures_use_compensated_sums() {
        let mu = random_configuration(2, 1200, 4, false).unwrap();
        let spec = lam(2.0);
        let e = energy(&spec, &mu, Convention::Half).unwrap().value;
        let b = bilinear_form(&spec, &mu, &mu).unwrap();
        assert!((e - b / 2.0).abs() < 1e-13);
    }

    #[test]
    fn conjectured_value_examples() {
        let v = conjectured_value(2, Particles::Infinite, Convention::Half).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let v = conjectured_value(1, Particles::Finite(3), Convention::Half).unwrap();
        assert!((v - 2.0 / 9.0).abs() < 1e-15);
        let v = conjectured_value(2, Particles::Finite(6), Convention::Half).unwrap();
        assert!((v - 24.0 / 72.0).abs() < 1e-15);
        let v = conjectured_value(2, Particles::Finite(6), Convention::Plain).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!(conjectured_value(3, Particles::Finite(2), Convention::Half).is_err());
        assert!(conjectured_value_unchecked(3, Particles::Finite(2), Convention::Half).is_ok());
    }

    #[test]
    fn conjectured_value_matches_pair_count() {
        // pairs of particles in different classes, each contributing Λ = 1
        for d in 1..5 {
            for n in d + 1..30 {
                let sizes = crate::measures::fejes_toth_class_sizes(d, n);
                let mut cross = 0usize;
                for (i, a) in sizes.iter().enumerate() {
                    for (j, b) in sizes.iter().enumerate() {
                        if i != j {
                            cross += a * b;
                        }
                    }
                }
                let oracle = cross as f64 / (2.0 * (n * n) as f64);
                let v = conjectured_value(d, Particles::Finite(n), Convention::Half).unwrap();
                assert!((v - oracle).abs() < 1e-15);
                let psi = fejes_toth_config(d, n).unwrap();
                let e = energy(&lam(3.0), &psi, Convention::Half).unwrap().value;
                assert!((e - oracle).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn potential_examples() {
        for d in 1..5 {
            let mu = equidistributed_basis(d).unwrap();
            let e0 = SpherePoint::basis(d, 0).unwrap();
            let v = potential(&lam(2.7), &mu, &e0).unwrap();
            assert!((v - d as f64 / (d as f64 + 1.0)).abs() < 1e-15);
        }
        let y = SpherePoint::basis(2, 2).unwrap();
        let dy = DiscreteMeasure::dirac(y.clone());
        let x = SpherePoint::basis(2, 1).unwrap();
        assert_eq!(potential(&lam(1.0), &dy, &x).unwrap(), 1.0);
        assert_eq!(potential(&lam(1.0), &dy, &y).unwrap(), 0.0);
    }

    #[test]
    fn euler_lagrange_examples() {
        for d in 1..4 {
            let mu = equidistributed_basis(d).unwrap();
            let r = euler_lagrange_residual(&lam(2.0), &mu, 10_000, 1).unwrap();
            assert!(r < 1e-9, "d={d} residual {r}");
        }
        // dense probing on the circle
        let mu = equidistributed_basis(1).unwrap();
        let spec = lam(2.0);
        let peak = (0..100_000)
            .map(|k| {
                let p = SpherePoint::on_circle(2.0 * PI * k as f64 / 100_000.0);
                potential(&spec, &mu, &p).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(peak <= 0.5 + 1e-12);

        let x = SpherePoint::basis(2, 0).unwrap();
        let dx = DiscreteMeasure::dirac(x);
        let r = euler_lagrange_residual(&lam(2.0), &dx, 20_000, 2).unwrap();
        assert!(r > 0.95 && r <= 1.0);
        let r = euler_lagrange_residual(&lam(2.0), &dx, 0, 2).unwrap();
        assert_eq!(r, 0.0);
        assert!(euler_lagrange_residual(&lam(f64::INFINITY), &dx, 1, 2).is_err());
    }

    #[test]
    fn uniform_energy_closed_forms() {
        for alpha in [1.0, 3.0, 0.5, 2.5] {
            let v = uniform_energy(1, alpha, Convention::Half).unwrap();
            assert!((v - 1.0 / (2.0 * (alpha + 1.0))).abs() < 1e-9, "alpha {alpha}: {v}");
        }
        // d = 2, α = 2: ½ (4/π²)(π - 2)
        let v = uniform_energy(2, 2.0, Convention::Half).unwrap();
        assert!((v - 2.0 * (PI - 2.0) / (PI * PI)).abs() < 1e-9);
        let p = uniform_energy(2, 2.0, Convention::Plain).unwrap();
        assert_eq!(p, 2.0 * v);
        assert!(uniform_energy(2, f64::INFINITY, Convention::Half).is_err());
    }

    #[test]
    fn kernel_sup_diff_examples() {
        assert_eq!(kernel_sup_diff(2.0, 2.0).unwrap(), 0.0);
        assert!((kernel_sup_diff(1.0, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((kernel_sup_diff(2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        // grid oracle
        for (a, b) in [(0.5, 3.0), (1.2, 1.3), (4.0, 9.0)] {
            let grid = (0..=200_000)
                .map(|k| {
                    let s = k as f64 / 200_000.0;
                    (s.powf(a) - s.powf(b)).abs()
                })
                .fold(0.0, f64::max);
            let v = kernel_sup_diff(a, b).unwrap();
            assert!(v >= grid - 1e-12 && v - grid < 1e-6);
        }
    }

    #[test]
    fn kernel_sup_diff_bounds_energy_gap() {
        let mut rng = seeded(21);
        use rand::Rng;
        for seed in 0..100 {
            let a: f64 = rng.random_range(0.2..5.0);
            let b: f64 = rng.random_range(0.2..5.0);
            let mu = random_configuration(2, 6, seed, true).unwrap();
            let gap = (energy_alpha(a, &mu).unwrap() - energy_alpha(b, &mu).unwrap()).abs();
            assert!(gap <= kernel_sup_diff(a, b).unwrap() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn gradient_examples() {
        for d in 1..4 {
            let mu = equidistributed_basis(d).unwrap();
            for g in energy_gradient(&lam(2.0), &mu).unwrap() {
                assert!(g.norm() < 1e-12);
            }
        }
        let single = DiscreteMeasure::dirac(SpherePoint::basis(3, 1).unwrap());
        assert_eq!(energy_gradient(&lam(2.0), &single).unwrap()[0].norm(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_difference_for_two_atoms() {
        let spec = lam(2.0);
        let mu = DiscreteMeasure::uniform(vec![
            SpherePoint::on_circle(0.0),
            SpherePoint::on_circle(FRAC_PI_4),
        ])
        .unwrap();
        let grads = energy_gradient(&spec, &mu).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let x = &mu.atoms()[i].point;
            let dir = TangentVector::new(x.clone(), vec![-x.coords()[1], x.coords()[0]]).unwrap();
            let shifted = |s: f64| {
                let mut pts: Vec<SpherePoint> = mu.points().cloned().collect();
                pts[i] = exp_map(&dir.scaled(s)).unwrap();
                energy(&spec, &mu.with_points(pts).unwrap(), Convention::Half)
                    .unwrap()
                    .value
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let an: f64 = grads[i].vec().iter().zip(dir.vec()).map(|(a, b)| a * b).sum();
            assert!(((fd - an) / an).abs() < 1e-6, "atom {i}: fd {fd} analytic {an}");
        }
    }

    #[test]
    fn energy_is_rotation_invariant() {
        let mut rng = seeded(99);
        for seed in 0..30 {
            let d = 1 + seed as usize % 3;
            let mu = random_configuration(d, 7, seed, true).unwrap();
            let m = random_orthogonal(d + 1, &mut rng);
            let rotated = mu.transform(&m).unwrap();
            let a = energy_alpha(1.5, &mu).unwrap();
            let b = energy_alpha(1.5, &rotated).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
