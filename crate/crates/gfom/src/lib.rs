//! Simulation and analysis of general first-order methods (GFOMs) on two
//! synthetic high-dimensional estimation models: noisy regression with a
//! Gaussian design and low-rank (spiked) matrix estimation.
//!
//! The crate has five layers:
//!
//! * [`prior`] / [`channel`] / [`quad`] — discrete signal priors, output
//!   channels, and the Gauss-Hermite machinery behind every scalar Bayes
//!   computation (posterior means, MMSE, second moments of conditional
//!   expectations, score expectations).
//! * [`se`] — the state-evolution recursions that lower-bound the estimation
//!   error of any GFOM, for both models, plus the coefficient arrays of the
//!   bound-achieving Bayes-AMP.
//! * [`engine`] — finite-instance execution of GFOMs and AMP algorithms,
//!   the GFOM-to-AMP change of variables with Monte Carlo Onsager
//!   coefficients, Bayes-AMP construction, and empirical state-evolution
//!   checks.
//! * [`apps`] — closed-form recursions and weak-recovery thresholds for the
//!   two applications: sparse PCA and sparse phase retrieval.
//! * [`harness`] — reproducible experiment orchestration: seeded replicates,
//!   replicate aggregation with z-scores, CSV/JSON output.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `gfom` binary for a thin command-line front end.

pub mod apps;
pub(crate) mod mat;
pub mod channel;
pub mod engine;
pub mod error;
pub mod harness;
pub mod prior;
pub mod quad;
pub mod se;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
