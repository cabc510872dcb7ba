//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use projenergy::energy::{energy, energy_gradient, Convention};
use projenergy::geometry::{exp_map, grad_kernel, kernel_value, KernelSpec, SpherePoint, TangentVector};
use projenergy::measures::DiscreteMeasure;
use rand::Rng;

/// Orthonormal basis of the tangent space at `x` (Gram-Schmidt on the
/// ambient axes).
pub fn tangent_basis(x: &SpherePoint) -> Vec<Vec<f64>> {
    let n = x.ambient_dim();
    let mut basis: Vec<Vec<f64>> = vec![x.coords().to_vec()];
    for k in 0..n {
        let mut v: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i == k))).collect();
        for b in &basis {
            let c: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
            v.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
        }
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 1e-6 {
            basis.push(v.into_iter().map(|c| c / len).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

pub fn step(x: &SpherePoint, dir: &[f64], h: f64) -> SpherePoint {
    let v: Vec<f64> = dir.iter().map(|c| c * h).collect();
    exp_map(&TangentVector::new(x.clone(), v).unwrap()).unwrap()
}

fn relative_error(fd: &[f64], exact: &[f64]) -> f64 {
    let diff = fd.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = exact.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

/// Gradient of `f` at `x` by central differences along a tangent basis,
/// expressed in ambient coordinates.
pub fn fd_gradient<F: Fn(&SpherePoint) -> f64>(x: &SpherePoint, f: F, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.ambient_dim()];
    for b in tangent_basis(x) {
        let slope = (f(&step(x, &b, h)) - f(&step(x, &b, -h))) / (2.0 * h);
        g.iter_mut().zip(&b).for_each(|(acc, v)| *acc += slope * v);
    }
    g
}

/// Kernel of exponent in [0.5, 4] or the quadratic one.
pub fn random_kernel<R: Rng>(rng: &mut R) -> KernelSpec {
    if rng.random_bool(0.15) {
        KernelSpec::quadratic()
    } else {
        KernelSpec::lambda(rng.random_range(0.5..4.0)).unwrap()
    }
}

/// Pair clear of the kink (|x·y| > margin) and of the coincident and
/// antipodal zones.
pub fn clear_pair(x: &[f64], y: &[f64], margin: f64) -> bool {
    let ip: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    ip.abs() > margin && ip.abs() < 1.0 - margin
}

/// Relative error of `grad_kernel` against central differences for a
/// random pair; `None` when the pair falls in an excluded zone.
pub fn kernel_gradient_check<R: Rng>(rng: &mut R, margin: f64) -> Option<f64> {
    let d = rng.random_range(1..=4);
    let spec = random_kernel(rng);
    let x = SpherePoint::random(d, rng);
    let y = SpherePoint::random(d, rng);
    if !clear_pair(x.coords(), y.coords(), margin) {
        return None;
    }
    let exact = grad_kernel(&spec, &x, &y).unwrap();
    assert!(!exact.capped);
    let fd = fd_gradient(&x, |p| kernel_value(&spec, p, &y).unwrap(), 1e-6);
    Some(relative_error(&fd, exact.tangent.vec()))
}

/// Same for `energy_gradient` of a random weighted measure, checking one
/// random atom.
pub fn energy_gradient_check<R: Rng>(rng: &mut R, margin: f64) -> Option<f64> {
    let d = rng.random_range(1..=3);
    let n = rng.random_range(2..=6);
    let spec = random_kernel(rng);
    let points: Vec<SpherePoint> = (0..n).map(|_| SpherePoint::random(d, rng)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    for i in 0..n {
        for j in 0..i {
            if !clear_pair(points[i].coords(), points[j].coords(), margin) {
                return None;
            }
        }
    }
    let mu = DiscreteMeasure::new(points.clone(), weights.clone()).unwrap();
    let k = rng.random_range(0..n);
    let exact = energy_gradient(&spec, &mu).unwrap();
    let f = |p: &SpherePoint| {
        let mut pts = points.clone();
        pts[k] = p.clone();
        let moved = DiscreteMeasure::new(pts, weights.clone()).unwrap();
        energy(&spec, &moved, Convention::Half).unwrap().value
    };
    let fd = fd_gradient(&points[k], f, 1e-6);
    Some(relative_error(&fd, exact[k].vec()))
}
