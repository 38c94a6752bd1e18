//! Perturbation analysis of singular subspaces under additive Gaussian noise.
//!
//! The crate is organized around one question: if a data matrix `A` is
//! released as `A + sqrt(T)·G` with `G` a standard Gaussian matrix, how far do
//! the top-k right-singular subspace and the rank-k covariance reconstruction
//! move, and how tight are the closed-form bounds on that movement?
//!
//! Modules:
//!
//! * [`linalg`] — dense SVD/QR plumbing, projectors, weighted Gram matrices,
//!   norms, and the CSV matrix format shared by the CLI.
//! * [`bounds`] — every closed-form bound and the gap assumption check, as
//!   pure scalar functions of the spectrum.
//! * [`mechanism`] — the seeded Gaussian release mechanism with exact error
//!   measurement against the unperturbed truth.
//! * [`dyson_bessel`] — Euler–Maruyama integration of the coupled singular
//!   value / singular vector diffusion, plus the exact direct-path oracle.
//! * [`experiments`] — synthetic matrix generation, parallel Monte Carlo
//!   trials, bound comparison, scaling studies, and report emission.
//!
//! Everything random is seeded through [`rng::derive_seed`]; runs are
//! bit-reproducible at any worker-thread count.

pub mod bounds;
pub mod dyson_bessel;
pub mod error;
pub mod experiments;
pub mod floats;
pub mod linalg;
pub mod mechanism;
pub mod parallel;
pub mod rng;

pub use error::{Error, Result};
