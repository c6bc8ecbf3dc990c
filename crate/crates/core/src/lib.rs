//! Accelerated gradient dynamics near strict saddle points.
//!
//! The crate runs gradient descent, heavy-ball and the two-parameter
//! accelerated framework
//!
//! ```text
//! y^k     = x^k + γ_k (x^k − x^{k−1})
//! x^{k+1} = x^k + β_k (x^k − x^{k−1}) − α ∇f(y^k)
//! ```
//!
//! on (mostly quadratic) nonconvex problems, analyses the spectrum of the
//! heavy-ball iteration map at a critical point, and evaluates the
//! per-coordinate divergence rates of the framework on negative-curvature
//! directions.
//!
//! Modules:
//! - [`problems`]: quadratic test problems, gradient oracles, seeded sampling.
//! - [`schedules`]: momentum schedules `(β_k, γ_k)` and the Nesterov `t_k` sequence.
//! - [`optimizers`]: iteration engines, traces and escape times.
//! - [`spectral`]: the heavy-ball map `G`, its inverse and the spectrum of its Jacobian.
//! - [`rates`]: divergence-rate recurrence, its limit and closed-form escape bounds.
//! - [`experiments`]: toy trajectories, eigenspace-growth series and divergence tables.
//! - [`cli`]: command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
mod format;
pub mod optimizers;
pub mod problems;
pub mod rates;
pub mod rng;
pub mod schedules;
pub mod spectral;

pub use error::{Error, Result};
