//! Acceptance criteria, one line per criterion. Runs as a plain binary so
//! the report prints in order; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use projenergy::energy::energy_alpha;
use projenergy::equivalence::essentially_equivalent;
use projenergy::geometry::random_orthogonal;
use projenergy::measures::{classify, equidistributed_basis, merge_projective, random_configuration_with, MeasureClass};
use projenergy::optimize::{maximize_particles, stability_experiment, threshold_verdict, AscentOptions, Verdict};
use projenergy::rng::{seeded, stream};
use projenergy::transport::{assignment_bruteforce, dinf_distance, dp_distance, CostExponent, Metric};
use projenergy::verify::{chain_check, frame_bound_check, majorization_check, sample_uniform_moments};
use projenergy::{DiscreteMeasure, SpherePoint};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let pass = out.pass && took < budget;
    println!(
        "[{}] criterion {id} {name}: {} ({:.2}s / {}s budget)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn optimal_values() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 1..=3usize {
        let start = Instant::now();
        let opts = AscentOptions {
            restarts: 16,
            seed: 2024 + d as u64,
            ..AscentOptions::default()
        };
        let r = maximize_particles(d, d + 1, 2.5, &opts).expect("ascent runs");
        let target = d as f64 / (2 * d + 2) as f64;
        let err = (r.best_energy - target).abs();
        let secs = start.elapsed().as_secs_f64();
        pass &= err <= 1e-6 && secs < 10.0;
        parts.push(format!("d={d} E={:.12} err={err:.1e} {secs:.2}s", r.best_energy));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn divisible_threshold() -> Outcome {
    let opts = AscentOptions {
        restarts: 32,
        seed: 6,
        ..AscentOptions::default()
    };
    let r = maximize_particles(2, 6, 2.0, &opts).expect("ascent runs");
    let err = (r.best_energy - 1.0 / 3.0).abs();
    let merged = merge_projective(&r.best, 1e-6);
    let support = DiscreteMeasure::uniform(merged.points().cloned().collect()).expect("nonempty");
    let basis = equidistributed_basis(2).expect("d ≥ 1");
    let w = essentially_equivalent(&support, &basis, 1e-6).expect("small supports");
    let verdict = threshold_verdict(2, 6, 2.0, &opts).expect("verdict runs");
    Outcome {
        pass: err <= 1e-6 && w.equivalent && verdict.verdict == Verdict::Above,
        detail: format!(
            "E={:.12} err={err:.1e} support atoms={} basis residual={:.1e} verdict at α=2: {:?}",
            r.best_energy,
            merged.len(),
            w.residual,
            verdict.verdict
        ),
    }
}

fn majorization_suite() -> Outcome {
    let mut pass = true;
    let mut failures = Vec::new();
    for k in 0..=16 {
        let alpha = 2.0 + 0.25 * k as f64;
        let rep = majorization_check(alpha, 100_000).expect("valid input");
        if !rep.pass {
            pass = false;
            failures.push(format!("α={alpha} did not pass"));
        }
    }
    let mut located = Vec::new();
    for alpha in [1.0, 1.5, 1.9] {
        let rep = majorization_check(alpha, 100_000).expect("valid input");
        pass &= !rep.pass && rep.violation_near_endpoint;
        located.push(format!(
            "α={alpha}: min gap {:.2e} at |t|={:.6}, violation within 0.05 of 1: {}",
            rep.min_gap, rep.worst_t, rep.violation_near_endpoint
        ));
    }
    Outcome {
        pass,
        detail: format!(
            "17 exponents in [2, 6] pass{}; {}",
            if failures.is_empty() { String::new() } else { format!(" except {failures:?}") },
            located.join("; ")
        ),
    }
}

fn chain_suite() -> Outcome {
    let mut checked = 0;
    let mut failures = 0;
    let mut equality_mismatch = 0;
    let mut equal_count = 0;
    for d in 1..=3usize {
        for k in 0..100u64 {
            let mut rng = stream(40 + d as u64, k);
            // every tenth input is a rotated measure on d+1 orthogonal lines
            let mu = if k % 10 == 0 {
                let q = random_orthogonal(d + 1, &mut rng);
                let basis: Vec<SpherePoint> = (0..=d).map(|i| SpherePoint::basis(d, i).unwrap()).collect();
                let weights: Vec<f64> = if k % 20 == 0 {
                    vec![1.0; d + 1]
                } else {
                    (0..=d).map(|_| rng.random_range(0.1..1.0)).collect()
                };
                let flips: Vec<bool> = (0..=d).map(|_| rng.random()).collect();
                DiscreteMeasure::new(basis, weights).unwrap().transform(&q).unwrap().flip_signs(&flips)
            } else {
                let n = rng.random_range(1..=8);
                random_configuration_with(d, n, rng.random(), &mut rng).unwrap()
            };
            let is_pdelta_eq = classify(&mu, 1e-9) == MeasureClass::PDeltaEq;
            for alpha in [2.0, 4.0] {
                let rep = chain_check(&mu, alpha).expect("alpha ≥ 2");
                checked += 1;
                failures += usize::from(!rep.pass);
                equality_mismatch += usize::from(rep.all_equal != is_pdelta_eq);
                equal_count += usize::from(rep.all_equal);
            }
        }
    }
    Outcome {
        pass: failures == 0 && equality_mismatch == 0 && equal_count > 0,
        detail: format!(
            "{checked} checks, {failures} failures, full equality on {equal_count} (all PDeltaEq), {equality_mismatch} mismatches"
        ),
    }
}

fn transport_sandwich() -> Outcome {
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lower = f64::NEG_INFINITY;
    let mut oracle_checked = 0;
    let mut oracle_mismatch = 0;
    for k in 0..100u64 {
        let mut rng = stream(55, k);
        let n = rng.random_range(2..=10usize);
        let d = rng.random_range(1..=2usize);
        let cloud = |rng: &mut rand_chacha::ChaCha8Rng| {
            DiscreteMeasure::uniform((0..n).map(|_| SpherePoint::random(d, rng)).collect()).unwrap()
        };
        let mu = cloud(&mut rng);
        let nu = cloud(&mut rng);
        let dinf = dinf_distance(&mu, &nu, Metric::Sphere).unwrap().0;
        for (p, exp) in [(CostExponent::One, 1.0), (CostExponent::Two, 2.0)] {
            let dp = dp_distance(&mu, &nu, p, Metric::Sphere).unwrap().0;
            worst_upper = worst_upper.max(dp - dinf);
            worst_lower = worst_lower.max((n as f64).powf(-1.0 / exp) * dinf - dp);
            if n <= 7 {
                oracle_checked += 1;
                let slow = assignment_bruteforce(&mu, &nu, p, Metric::Sphere).unwrap();
                oracle_mismatch += usize::from(slow != dp);
            }
        }
        if n <= 7 {
            oracle_checked += 1;
            let slow = assignment_bruteforce(&mu, &nu, CostExponent::Infinity, Metric::Sphere).unwrap();
            oracle_mismatch += usize::from(slow != dinf);
        }
    }
    Outcome {
        pass: worst_upper <= 1e-10 && worst_lower <= 0.0 && oracle_mismatch == 0,
        detail: format!(
            "max(d_p - d_inf)={worst_upper:.2e}, max(N^(-1/p) d_inf - d_p)={worst_lower:.2e}, brute force agrees exactly on {}/{oracle_checked}",
            oracle_checked - oracle_mismatch
        ),
    }
}

fn local_stability() -> Outcome {
    let mut total = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut configs = 0;
    for d in 1..=3usize {
        let basis: Vec<SpherePoint> = (0..=d).map(|k| SpherePoint::basis(d, k).unwrap()).collect();
        let mut skewed = vec![0.4 / d as f64; d + 1];
        skewed[0] = 0.6;
        for weights in [vec![1.0; d + 1], skewed] {
            let xi = DiscreteMeasure::new(basis.clone(), weights).unwrap();
            for alpha in [1.5, 2.0, 3.0] {
                let rep = stability_experiment(&xi, alpha, 0.05, 5, 1000, 77 + configs).unwrap();
                total += rep.violations;
                worst = worst.max(rep.max_energy_gain);
                configs += 1;
            }
        }
    }
    Outcome {
        pass: total == 0,
        detail: format!("{configs} configurations x 1000 trials, {total} violations, largest gain {worst:.3e}"),
    }
}

fn circle_degeneracy() -> Outcome {
    let quarter = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let mut rng = stream(88, k);
        let n = rng.random_range(1..=10);
        let mu = random_configuration_with(1, n, true, &mut rng).unwrap();
        let sym = mu.mix(&mu.transform(&quarter).unwrap(), 0.5).unwrap();
        worst = worst.max((energy_alpha(1.0, &sym).unwrap() - 0.25).abs());
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("100 symmetrized measures, max |E_1 - 1/4| = {worst:.2e}"),
    }
}

fn frame_identities() -> Outcome {
    let mc = sample_uniform_moments(2, 100_000, 31).unwrap();
    let dev = (mc.tr_i2 - 1.0 / 3.0).abs();
    let mc_ok = dev <= 3.0 * mc.tr_i2_std_error;
    let mut worst: f64 = 0.0;
    let mut rng = seeded(32);
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(1..=12);
        let mu = random_configuration_with(d, n, true, &mut rng).unwrap();
        let rep = frame_bound_check(&mu).unwrap();
        worst = worst.max((rep.e_g - (1.0 - rep.tr_i2)).abs());
    }
    Outcome {
        pass: mc_ok && worst <= 1e-12,
        detail: format!(
            "Tr(I^2)={:.9} |dev|={dev:.2e} vs 3 SE={:.2e}; max |E_g - (1 - Tr I^2)| = {worst:.2e} over 100 measures",
            mc.tr_i2,
            3.0 * mc.tr_i2_std_error
        ),
    }
}

fn gradient_checks() -> Outcome {
    let mut rng = seeded(909);
    let (mut kernel_n, mut energy_n) = (0, 0);
    let mut worst: f64 = 0.0;
    while kernel_n < 500 {
        if let Some(e) = common::kernel_gradient_check(&mut rng, 1e-3) {
            worst = worst.max(e);
            kernel_n += 1;
        }
    }
    while energy_n < 500 {
        if let Some(e) = common::energy_gradient_check(&mut rng, 1e-3) {
            worst = worst.max(e);
            energy_n += 1;
        }
    }
    Outcome {
        pass: worst < 1e-5,
        detail: format!("{kernel_n} kernel + {energy_n} energy checks, max relative error {worst:.2e}"),
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        run(1, "optimal value reproduction", secs(30), optimal_values),
        run(2, "divisible-N threshold", secs(60), divisible_threshold),
        run(3, "majorization suite", secs(5), majorization_suite),
        run(4, "chain suite", secs(30), chain_suite),
        run(5, "transport sandwich", secs(60), transport_sandwich),
        run(6, "local stability", secs(120), local_stability),
        run(7, "circle degeneracy at α = 1", secs(5), circle_degeneracy),
        run(8, "frame identities", secs(10), frame_identities),
        run(9, "gradient correctness", secs(10), gradient_checks),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
