mod common;

use projenergy::rng::seeded;

const MARGIN: f64 = 1e-3;

#[test]
fn kernel_gradients_match_finite_differences() {
    let mut rng = seeded(101);
    let mut checked = 0;
    while checked < 1000 {
        if let Some(err) = common::kernel_gradient_check(&mut rng, MARGIN) {
            assert!(err < 1e-5, "relative error {err}");
            checked += 1;
        }
    }
}

#[test]
fn energy_gradients_match_finite_differences() {
    let mut rng = seeded(202);
    let mut checked = 0;
    while checked < 1000 {
        if let Some(err) = common::energy_gradient_check(&mut rng, MARGIN) {
            assert!(err < 1e-5, "relative error {err}");
            checked += 1;
        }
    }
}
