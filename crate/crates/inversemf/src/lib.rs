//! Random weak Gibbs measures on interval attractors driven by a random
//! subshift of finite type, their discrete inverse measures, and the
//! multifractal analysis layer that compares empirical spectra against the
//! thermodynamic predictions.
//!
//! Pipeline, bottom to top:
//! - [`env`]: the finite-state Markov environment with per-state branch
//!   geometry and potentials, plus validation and path sampling.
//! - [`subshift`]: admissible words over a sampled path, mixing times, and
//!   the bridging operation.
//! - [`geometry`] / [`potential`]: cylinder intervals, attractor extrema,
//!   Birkhoff-sum bounds, variation moduli.
//! - [`thermo`]: topological pressure, pressure-equation roots, Legendre
//!   transforms, duality checks.
//! - [`gibbs`]: the transfer-operator eigenproblem solved by backward dual
//!   power iteration; cylinder mass tables.
//! - [`inverse`]: the inverse measure as an explicit weighted Dirac sum.
//! - [`analysis`]: L^q-spectrum estimation, local dimensions, approximation
//!   degrees, ubiquity sampling, box dimension, and the full report.


pub mod analysis;
pub mod curve;
pub mod env;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod inverse;
pub mod potential;
pub mod presets;
pub mod report;
pub mod rng;
pub mod subshift;
pub mod thermo;

pub use error::{Error, Result};
