//! Numerical laboratory for the time-elapsed neuron network model.
//!
//! Neurons are structured by the time `x` elapsed since their last
//! discharge. The density `f(t, x)` is transported at unit speed and
//! depleted at the firing rate `a(x, eps m(t))`; discharged neurons re-enter
//! at `x = 0`, and the network activity `m` is the discharge flux, possibly
//! seen through a delay kernel.
//!
//! The crate covers
//!
//! - [`model`]: rate families, delay kernels and hypothesis checks,
//! - [`grid`]: truncated age grids, densities, norms and a 1-D Wasserstein
//!   surrogate,
//! - [`steady`]: steady states and the root problem `Phi(eps, M) = 1`,
//! - [`dynamics`]: the exact-shift transport scheme, activity fixed points,
//!   trajectories and decay fits,
//! - [`spectrum`]: dense linearized generators, their spectra and semigroup
//!   checks,
//! - [`experiments`]: config-driven runners behind the `elapsed-lab` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
mod quad;
pub mod spectrum;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{Density, Grid};
pub use model::{DelayKernel, RateDerivative, RateModel};
pub use steady::SteadyState;
