//! Generalized Lasso and lifted Lasso estimation under sub-exponential inputs.
//!
//! The crate is organized around the pieces needed to run an estimation
//! experiment end to end and to measure every ingredient of its error bound:
//!
//! - [`distributions`]: input laws, concentration profiles, Orlicz-norm proxies
//!   and empirical tail checks.
//! - [`models`]: observation models, dataset generation, target scalings and
//!   mismatch parameters.
//! - [`geometry`]: convex hypothesis sets with projections, support functions
//!   and direction samplers.
//! - [`solver`]: projected gradient descent for the constrained least-squares
//!   problem and its lifted matrix variant.
//! - [`complexity`]: Monte-Carlo widths, small-ball estimates and closed-form
//!   complexity bounds, assembled into sample-size and error predictions.
//! - [`harness`]: seeded experiments, decay-rate fits, certificates and I/O.

pub mod complexity;
pub mod distributions;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mc;
pub mod models;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
