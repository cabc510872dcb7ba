//! Energy maximization over particle positions and weights, plus the
//! experiments built on it.

mod aggregation;
mod stability;
mod threshold;

pub use aggregation::{aggregation_constant, AggregationReport};
pub use stability::{stability_experiment, StabilityReport};
pub use threshold::{estimate_threshold, threshold_verdict, ThresholdEstimate, ThresholdSample, Verdict};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, gradient_raw, Convention};
use crate::error::{Error, Result};
use crate::geometry::{dot, exp_map, norm, KernelSpec, SpherePoint, TangentVector};
use crate::measures::DiscreteMeasure;
use crate::rng::stream;

/// Smallest trial step before a restart is declared stuck.
pub const MIN_STEP: f64 = 1e-14;

/// Accepted steps in a row with gain at most `energy_tol` before stopping.
pub const STALL_LIMIT: usize = 20;

/// Pairs with `|x·y|` below this are treated as sitting on the kink ridge
/// of Λ when building the ridge-following candidate.
pub const KINK_BAND: f64 = 1e-3;

/// Largest `N(d+1)` for which the ridge candidate is built.
const RIDGE_MAX_VARIABLES: usize = 600;

/// Supports orthogonal within this tolerance get exactly uniform weights.
pub const ORTHOGONAL_SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AscentOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Largest per-atom displacement tried in each iteration, in radians.
    pub initial_step: f64,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub seed: u64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 5000,
            initial_step: 0.5,
            grad_tol: 1e-8,
            energy_tol: 1e-13,
            seed: 0,
        }
    }
}

impl AscentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step < std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "initial_step must lie in (0, π), got {}",
                self.initial_step
            )));
        }
        if !(self.grad_tol > 0.0 && self.energy_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Why a restart stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Gradient,
    StepUnderflow,
    Stalled,
    IterationCap,
}

impl StopReason {
    pub fn converged(self) -> bool {
        self != StopReason::IterationCap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentResult {
    pub best: DiscreteMeasure,
    /// Half convention.
    pub best_energy: f64,
    pub best_restart: usize,
    pub per_restart_energies: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged_flags: Vec<bool>,
    pub stop_reasons: Vec<StopReason>,
    /// Accepted energies per restart, starting with the initial one.
    pub traces: Vec<Vec<f64>>,
}

pub(crate) struct RestartOutcome {
    pub measure: DiscreteMeasure,
    pub energy: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: Vec<f64>,
}

fn half_energy(spec: &KernelSpec, mu: &DiscreteMeasure) -> f64 {
    energy(spec, mu, Convention::Half)
        .expect("kernel validated by caller")
        .value
}

fn moved(mu: &DiscreteMeasure, grads: &[Vec<f64>], scale: f64) -> Result<DiscreteMeasure> {
    let points = mu
        .points()
        .zip(grads)
        .map(|(p, g)| {
            let v: Vec<f64> = g.iter().map(|c| c * scale).collect();
            exp_map(&TangentVector::new(p.clone(), v)?)
        })
        .collect::<Result<Vec<SpherePoint>>>()?;
    mu.with_points(points)
}

/// Gradient projected onto the linearized constraints `x_i·x_j = 0` of the
/// nearly orthogonal pairs, plus the least-norm displacement that puts those
/// pairs back on the ridge. Plain gradient steps zigzag across the ridge
/// with ever shorter steps; moving along it does not.
struct Ridge {
    correction: Vec<Vec<f64>>,
    direction: Vec<Vec<f64>>,
}

fn ridge(mu: &DiscreteMeasure, grads: &[Vec<f64>]) -> Option<Ridge> {
    let pts: Vec<&[f64]> = mu.points().map(|p| p.coords()).collect();
    let (n, dim) = (pts.len(), mu.dim() + 1);
    let vars = n * dim;
    if vars > RIDGE_MAX_VARIABLES {
        return None;
    }
    let mut active = Vec::new();
    for i in 0..n {
        for j in 0..i {
            let ip = dot(pts[i], pts[j]);
            if ip.abs() < KINK_BAND {
                active.push((i, j, ip));
            }
        }
    }
    if active.is_empty() {
        return None;
    }
    // rows: tangency x_i·v_i = 0, then x_j·v_i + x_i·v_j = -ip
    let rows = n + active.len();
    let mut a = DMatrix::<f64>::zeros(rows, vars);
    let mut rhs = DVector::<f64>::zeros(rows);
    for i in 0..n {
        for k in 0..dim {
            a[(i, i * dim + k)] = pts[i][k];
        }
    }
    for (r, &(i, j, ip)) in active.iter().enumerate() {
        for k in 0..dim {
            a[(n + r, i * dim + k)] = pts[j][k];
            a[(n + r, j * dim + k)] = pts[i][k];
        }
        rhs[n + r] = -ip;
    }
    let g = DVector::from_iterator(vars, grads.iter().flatten().copied());
    let gram_inv = (&a * a.transpose()).pseudo_inverse(1e-12).ok()?;
    let projected = &g - a.transpose() * (&gram_inv * (&a * &g));
    let correction = a.transpose() * (&gram_inv * rhs);
    let split = |v: &DVector<f64>| -> Vec<Vec<f64>> {
        (0..n).map(|i| v.as_slice()[i * dim..(i + 1) * dim].to_vec()).collect()
    };
    Some(Ridge {
        correction: split(&correction),
        direction: split(&projected),
    })
}

fn ridge_moved(mu: &DiscreteMeasure, r: &Ridge, scale: f64) -> Result<DiscreteMeasure> {
    let points = mu
        .points()
        .zip(r.correction.iter().zip(&r.direction))
        .map(|(p, (c, v))| {
            SpherePoint::new(
                p.coords()
                    .iter()
                    .zip(c.iter().zip(v))
                    .map(|(x, (c, v))| x + c + scale * v)
                    .collect(),
            )
        })
        .collect::<Result<Vec<SpherePoint>>>()?;
    mu.with_points(points)
}

/// Backtracking from `initial` by halving until `make(step)` does not lose
/// energy.
fn line_search<F>(spec: &KernelSpec, current: f64, initial: f64, make: F) -> Result<Option<(DiscreteMeasure, f64)>>
where
    F: Fn(f64) -> Result<DiscreteMeasure>,
{
    let mut step = initial;
    while step >= MIN_STEP {
        let candidate = make(step)?;
        let e = half_energy(spec, &candidate);
        if e >= current {
            return Ok(Some((candidate, e)));
        }
        step *= 0.5;
    }
    Ok(None)
}

/// Gradient ascent on positions with weights held fixed. Every accepted
/// step satisfies `E(new) >= E(old)`.
pub(crate) fn ascend(spec: &KernelSpec, start: DiscreteMeasure, opts: &AscentOptions) -> Result<RestartOutcome> {
    let mut mu = start;
    let mut current = half_energy(spec, &mu);
    let mut trace = vec![current];
    let mut stalled = 0;
    let mut iterations = 0;
    let stop = loop {
        if iterations >= opts.max_iters {
            break StopReason::IterationCap;
        }
        let grads = gradient_raw(spec, &mu);
        let gmax = grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
        if gmax < opts.grad_tol {
            break StopReason::Gradient;
        }
        iterations += 1;
        let plain = line_search(spec, current, opts.initial_step, |step| moved(&mu, &grads, step / gmax))?;
        let along = match ridge(&mu, &grads) {
            Some(r) => {
                let rmax = r.direction.iter().map(|v| norm(v)).fold(0.0, f64::max);
                if rmax > 0.0 {
                    line_search(spec, current, opts.initial_step, |step| ridge_moved(&mu, &r, step / rmax))?
                } else {
                    line_search(spec, current, opts.initial_step, |_| ridge_moved(&mu, &r, 0.0))?
                }
            }
            None => None,
        };
        let accepted = match (plain, along) {
            (Some(a), Some(b)) => Some(if b.1 > a.1 { b } else { a }),
            (a, b) => a.or(b),
        };
        let Some((next, e)) = accepted else {
            break StopReason::StepUnderflow;
        };
        if e - current <= opts.energy_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        mu = next;
        current = e;
        trace.push(e);
        if stalled >= STALL_LIMIT {
            break StopReason::Stalled;
        }
    };
    Ok(RestartOutcome {
        measure: mu,
        energy: current,
        iterations,
        stop,
        trace,
    })
}

fn check_alpha(alpha: f64) -> Result<KernelSpec> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidKernel(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    KernelSpec::lambda(alpha)
}

fn collect_result(outcomes: Vec<RestartOutcome>) -> AscentResult {
    // first maximum in restart order, independent of scheduling
    let mut best_restart = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.energy > outcomes[best_restart].energy {
            best_restart = i;
        }
    }
    AscentResult {
        best: outcomes[best_restart].measure.clone(),
        best_energy: outcomes[best_restart].energy,
        best_restart,
        per_restart_energies: outcomes.iter().map(|o| o.energy).collect(),
        iterations: outcomes.iter().map(|o| o.iterations).collect(),
        converged_flags: outcomes.iter().map(|o| o.stop.converged()).collect(),
        stop_reasons: outcomes.iter().map(|o| o.stop).collect(),
        traces: outcomes.into_iter().map(|o| o.trace).collect(),
    }
}

/// Maximizes E_α over N equal-weight particles on S^d.
pub fn maximize_particles(d: usize, n: usize, alpha: f64, opts: &AscentOptions) -> Result<AscentResult> {
    opts.validate()?;
    let spec = check_alpha(alpha)?;
    if d < 1 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 particles, got {n}")));
    }
    let outcomes = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(opts.seed, k as u64);
            let points = (0..n).map(|_| SpherePoint::random(d, &mut rng)).collect();
            ascend(&spec, DiscreteMeasure::uniform(points)?, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_result(outcomes))
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Maximizes `½ wᵀ K w` over the simplex with the support fixed.
pub fn maximize_weights(support: &[SpherePoint], alpha: f64, iters: usize) -> Result<DiscreteMeasure> {
    let spec = check_alpha(alpha)?;
    let n = support.len();
    if n == 0 {
        return Err(Error::InvalidMeasure("empty support".into()));
    }
    let orthogonal = support.iter().enumerate().all(|(i, a)| {
        support[i + 1..]
            .iter()
            .all(|b| dot(a.coords(), b.coords()).abs() <= ORTHOGONAL_SUPPORT_TOL)
    });
    if orthogonal {
        return DiscreteMeasure::uniform(support.to_vec());
    }
    let k: Vec<Vec<f64>> = support
        .iter()
        .map(|a| support.iter().map(|b| spec.eval(a.coords(), b.coords())).collect())
        .collect();
    let max_row = k.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let mut w = vec![1.0 / n as f64; n];
    if max_row > 0.0 {
        let step = 1.0 / (2.0 * max_row);
        for _ in 0..iters {
            let grad: Vec<f64> = k.iter().map(|r| dot(r, &w)).collect();
            let raw: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            let next = project_simplex(&raw);
            let change = next
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            w = next;
            if change <= f64::EPSILON {
                break;
            }
        }
    }
    DiscreteMeasure::new(support.to_vec(), w)
}

/// Alternates particle ascent and weight optimization on N atoms, as an
/// approximation to maximizing over all probability measures.
pub fn maximize_measure(
    d: usize,
    n: usize,
    alpha: f64,
    opts: &AscentOptions,
    rounds: usize,
    weight_iters: usize,
) -> Result<AscentResult> {
    opts.validate()?;
    let spec = check_alpha(alpha)?;
    if d < 1 || n < 1 {
        return Err(Error::InvalidArgument("need d ≥ 1 and at least one atom".into()));
    }
    let outcomes = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(opts.seed, k as u64);
            let points = (0..n).map(|_| SpherePoint::random(d, &mut rng)).collect();
            let mut mu = DiscreteMeasure::uniform(points)?;
            let mut trace = vec![half_energy(&spec, &mu)];
            let mut iterations = 0;
            let mut stop = StopReason::IterationCap;
            for _ in 0..rounds.max(1) {
                let before = *trace.last().expect("nonempty trace");
                let out = ascend(&spec, mu, opts)?;
                iterations += out.iterations;
                trace.extend_from_slice(&out.trace[1..]);
                let points: Vec<SpherePoint> = out.measure.points().cloned().collect();
                let reweighted = maximize_weights(&points, alpha, weight_iters)?;
                let e = half_energy(&spec, &reweighted);
                // keep the ascent result if reweighting does not help
                if e >= out.energy {
                    mu = reweighted;
                    trace.push(e);
                } else {
                    mu = out.measure;
                }
                stop = out.stop;
                if *trace.last().expect("nonempty trace") - before <= opts.energy_tol {
                    break;
                }
            }
            Ok(RestartOutcome {
                energy: *trace.last().expect("nonempty trace"),
                measure: mu,
                iterations,
                stop,
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_result(outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{conjectured_value, Particles};
    use crate::equivalence::essentially_equivalent;
    use crate::measures::{equidistributed_basis, merge_projective};

    fn opts(restarts: usize, seed: u64) -> AscentOptions {
        AscentOptions {
            restarts,
            seed,
            ..AscentOptions::default()
        }
    }

    #[test]
    fn orthogonal_pair_on_circle() {
        let r = maximize_particles(1, 2, 2.0, &opts(8, 1)).unwrap();
        assert!((r.best_energy - 0.25).abs() < 1e-7, "{}", r.best_energy);
        let merged = merge_projective(&r.best, 1e-6);
        let w = essentially_equivalent(&merged, &equidistributed_basis(1).unwrap(), 1e-6).unwrap();
        assert!(w.equivalent);
    }

    #[test]
    fn three_particles_on_s2() {
        let r = maximize_particles(2, 3, 3.0, &opts(16, 2)).unwrap();
        let target = conjectured_value(2, Particles::Finite(3), Convention::Half).unwrap();
        assert!((r.best_energy - target).abs() < 1e-6, "{}", r.best_energy);
        assert!((target - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn traces_are_monotone_and_best_is_max() {
        let r = maximize_particles(2, 5, 1.5, &opts(6, 3)).unwrap();
        for t in &r.traces {
            assert!(t.windows(2).all(|w| w[1] >= w[0]));
        }
        let max = r.per_restart_energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_energy, max);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let o = opts(4, 9);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| maximize_particles(2, 4, 2.5, &o).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| maximize_particles(2, 4, 2.5, &o).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn option_validation() {
        let bad = AscentOptions {
            restarts: 0,
            ..AscentOptions::default()
        };
        assert!(maximize_particles(2, 3, 2.0, &bad).is_err());
        let bad = AscentOptions {
            grad_tol: 0.0,
            ..AscentOptions::default()
        };
        assert!(maximize_particles(2, 3, 2.0, &bad).is_err());
        assert!(maximize_particles(2, 1, 2.0, &opts(1, 0)).is_err());
        assert!(maximize_particles(2, 3, f64::INFINITY, &opts(1, 0)).is_err());
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.3, -0.2, 0.6]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn weights_examples() {
        for d in 1..4 {
            let support: Vec<SpherePoint> = (0..=d).map(|k| SpherePoint::basis(d, k).unwrap()).collect();
            let mu = maximize_weights(&support, 2.0, 100).unwrap();
            assert!(mu.weights().iter().all(|w| *w == 1.0 / (d + 1) as f64));
        }
        let single = maximize_weights(&[SpherePoint::basis(2, 0).unwrap()], 2.0, 100).unwrap();
        assert_eq!(single.weights(), vec![1.0]);
        let pair = [SpherePoint::on_circle(0.0), SpherePoint::on_circle(std::f64::consts::FRAC_PI_4)];
        let mu = maximize_weights(&pair, 2.0, 1000).unwrap();
        for w in mu.weights() {
            assert!((w - 0.5).abs() < 1e-12);
        }
        // brute force over the 1-simplex
        let spec = KernelSpec::lambda(2.0).unwrap();
        let best = (0..=1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                half_energy(&spec, &DiscreteMeasure::new(pair.to_vec(), vec![t, 1.0 - t]).unwrap())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((half_energy(&spec, &mu) - best).abs() < 1e-12);
    }

    #[test]
    fn measure_optimizer_finds_basis() {
        let r = maximize_measure(2, 5, 3.0, &opts(4, 4), 5, 2000).unwrap();
        assert!((r.best_energy - 1.0 / 3.0).abs() < 1e-6, "{}", r.best_energy);
    }
}
