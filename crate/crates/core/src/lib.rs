//! Numerical laboratory for renormalization of real-analytic critical circle maps.
//!
//! The crate builds dynamical partitions and first-return (commuting) pairs for
//! circle maps with a single cubic critical point, renormalizes those pairs,
//! measures real and complex a-priori bounds, Yoccoz-style saddle-node profiles,
//! holomorphic-pair control constants, limit-set geometry, and rigidity
//! observables such as quasisymmetric distortion and scaling-ratio convergence.
//!
//! All measurements are plain f64 numerics on explicitly constructed orbits:
//! nothing here is a proof, but every quantity is tied to a decidable
//! combinatorial certificate (orbit cyclic order, closest-return times,
//! interval containments) wherever one exists.

pub mod circle;
pub mod complexgeom;
pub mod error;
pub mod fit;
pub mod holopair;
pub mod maps;
pub mod parabolic;
pub mod partition;
pub mod renorm;
pub mod rigidity;
pub mod rotation;

pub use error::{Error, Result};
pub use fit::FitResult;
