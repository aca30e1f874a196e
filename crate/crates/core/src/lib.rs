//! Regularized fitting of scattered data on the flat torus `T^m`.
//!
//! A fit minimizes
//! `(λ²/n) Σ (u(p_i) - q_i)² + λ ‖∇^k u‖² + ‖u‖²` either over trigonometric
//! polynomials of bounded degree (truncated kernel) or over the whole Sobolev
//! space (full kernel). See [`solver::fit`].

pub mod cli;
pub mod error;
pub mod experiments;
pub mod kernel;
mod linalg;
pub mod oracle;
pub mod persist;
pub mod sampling;
pub mod schedule;
pub mod solver;
pub mod sum;
pub mod targets;
pub mod torus;
pub mod trig;

pub use error::{Error, Result};
