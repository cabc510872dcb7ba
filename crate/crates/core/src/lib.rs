//! Projective-angle interaction energies on spheres.
//!
//! The energy of a probability measure μ on S^d is
//! `E_α(μ) = ½ ∬ Λ(x, y)^α dμ(x) dμ(y)`, where Λ is the geodesic distance on
//! RP^d scaled to unit diameter. This crate evaluates these energies,
//! searches for maximizing configurations, measures transport distances
//! between discrete measures, decides equivalence up to rotation, and
//! checks the majorization bound for α ≥ 2 numerically.

pub mod energy;
pub mod equivalence;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod optimize;
pub mod rng;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{KernelFamily, KernelSpec, SpherePoint, TangentVector};
pub use measures::{DiscreteMeasure, MeasureClass};
