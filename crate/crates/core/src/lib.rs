//! Calculus, inequality lab, and solver for the curvature quotient equation
//! `sigma_n / sigma_k (lambda(X)) = f(X)` on convex graphs.

pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ineq_lab;
pub mod io;
pub mod parallel;
pub mod quotient;
pub mod solver;
pub mod symfun;

pub use error::{Error, Result};
