use projenergy::measures::DiscreteMeasure;
use projenergy::rng::stream;
use projenergy::transport::{assignment_bruteforce, dinf_distance, dp_distance, CostExponent, Metric};
use projenergy::SpherePoint;
use rand::Rng;

fn uniform_cloud<R: Rng>(d: usize, n: usize, rng: &mut R) -> DiscreteMeasure {
    DiscreteMeasure::uniform((0..n).map(|_| SpherePoint::random(d, rng)).collect()).unwrap()
}

#[test]
fn assignment_matches_bruteforce() {
    for (pi, p) in [CostExponent::One, CostExponent::Two, CostExponent::Infinity].into_iter().enumerate() {
        for d in 1..=3 {
            for metric in [Metric::Sphere, Metric::Projective] {
                for k in 0..100u64 {
                    let mut rng = stream(pi as u64 * 100 + d as u64, k);
                    let n = rng.random_range(1..=7);
                    let mu = uniform_cloud(d, n, &mut rng);
                    let nu = uniform_cloud(d, n, &mut rng);
                    let fast = match p {
                        CostExponent::Infinity => dinf_distance(&mu, &nu, metric).unwrap().0,
                        _ => dp_distance(&mu, &nu, p, metric).unwrap().0,
                    };
                    let slow = assignment_bruteforce(&mu, &nu, p, metric).unwrap();
                    assert_eq!(fast, slow, "p {p:?} d {d} instance {k}");
                }
            }
        }
    }
}

/// Weights k_i / M equal a uniform measure on M atoms with repeats, so the
/// flow solver must agree with the assignment solver on the expansion.
#[test]
fn weighted_flow_matches_expanded_assignment() {
    for k in 0..200u64 {
        let mut rng = stream(7, k);
        let d = rng.random_range(1..=2);
        let m = 6;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let atoms = rng.random_range(1..=3usize);
            let mut counts = vec![1usize; atoms];
            for _ in atoms..m {
                let i = rng.random_range(0..atoms);
                counts[i] += 1;
            }
            let pts: Vec<SpherePoint> = (0..atoms).map(|_| SpherePoint::random(d, rng)).collect();
            let weighted = DiscreteMeasure::new(pts.clone(), counts.iter().map(|&c| c as f64).collect()).unwrap();
            let expanded: Vec<SpherePoint> = pts
                .iter()
                .zip(&counts)
                .flat_map(|(p, &c)| std::iter::repeat_n(p.clone(), c))
                .collect();
            (weighted, DiscreteMeasure::uniform(expanded).unwrap())
        };
        let (mu, mu_x) = draw(&mut rng);
        let (nu, nu_x) = draw(&mut rng);
        for p in [CostExponent::One, CostExponent::Two] {
            let (flow, plan) = dp_distance(&mu, &nu, p, Metric::Sphere).unwrap();
            let oracle = assignment_bruteforce(&mu_x, &nu_x, p, Metric::Sphere).unwrap();
            assert!((flow - oracle).abs() < 1e-9, "instance {k}: {flow} vs {oracle}");
            assert!(plan.marginal_error(&mu.weights(), &nu.weights()) < 1e-11);
        }
        let (flow, _) = dinf_distance(&mu, &nu, Metric::Sphere).unwrap();
        let oracle = assignment_bruteforce(&mu_x, &nu_x, CostExponent::Infinity, Metric::Sphere).unwrap();
        assert_eq!(flow, oracle, "instance {k}");
    }
}
