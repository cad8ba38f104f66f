//! One-dimensional multi-particle diffusion limited aggregation (MDLA).
//!
//! A sticky aggregate occupies `[0, R(t)]` and grows into a Poisson cloud of
//! independent random walkers. The crate bundles:
//!
//! - [`model`]: parameters, the per-site particle field, trajectories and
//!   their CSV/JSON forms;
//! - [`simulator`]: exact continuous-time (event driven) and discrete-time
//!   dynamics with lost-particle bookkeeping;
//! - [`meanfield`]: the lattice ODE for the conditional Poisson intensities,
//!   alone or coupled to a random front;
//! - [`stefan`]: a moving-boundary heat equation solver for the subcritical
//!   density profile;
//! - [`analytics`]: closed-form growth constants and profiles;
//! - [`harness`]: ensembles, estimators, exponent fits, reports and the
//!   configuration used by the `mdla` binary.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod stefan;

pub use error::{Error, Result};
pub use model::{ModelParams, ParticleField, TimeMode, Trajectory};
