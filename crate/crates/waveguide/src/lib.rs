//! Numerical laboratory for bilinear space-time estimates for the free
//! Schrödinger propagator on the waveguide `R x T`. Frequency space is
//! `R x Z`; data live on a shared uniform xi-lattice with integer modes,
//! and all norms are evaluated on the frequency side.
//!
//! Module map:
//! - [`grid`]: frequency cubes, lattice-sampled frequency/physical functions
//! - [`bump`]: smooth cutoffs, the time weight and its transform
//! - [`transform`]: mixed continuous/discrete Fourier calculus, convolution
//! - [`propagator`]: free evolution, bilinear space-time norms, the
//!   quadruple-sum oracle
//! - [`norms`]: Lebesgue norms on both sides and the cube-refinement norm
//! - [`expsum`]: exponential sums, oscillatory integrals, Poisson
//!   summation, power-law fitting
//! - [`probe`]: ratio experiments, the necessity example, sweeps
//! - [`config`], [`report`]: CLI plumbing with deterministic output

pub mod bump;
pub mod config;
pub mod error;
pub mod expsum;
pub mod grid;
pub mod norms;
pub mod probe;
pub mod propagator;
pub mod report;
pub mod transform;

pub use error::{Error, Result};
