//! One-dimensional compressible, viscous, heat-conducting gas in Lagrangian
//! mass coordinates, with transport coefficients `mu = mu_tilde h(v) theta^alpha`
//! and `kappa = kappa_tilde h(v) theta^alpha`.
//!
//! The crate is layered bottom-up:
//!
//! * [`constitutive`]: equation of state, transport laws, entropy pair, the
//!   Kanel' potential and checks on the volume profile `h`.
//! * [`grid`]: truncated staggered mass grid, ghost handling, difference
//!   operators and discrete norms.
//! * [`solver`]: explicit SSP-RK2 and IMEX (Newton / backward Euler diffusion)
//!   integrators with step control.
//! * [`diagnostics`]: monitored functionals, energy-entropy identity residual,
//!   temperature-floor fit and decay metrics.
//! * [`verification`]: manufactured solutions, convergence studies and
//!   fine-grid references.
//! * [`harness`]: configuration, presets, runs, sweeps and file output.

pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
