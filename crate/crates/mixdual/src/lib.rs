//! A numerical laboratory for multiobjective variational problems with
//! square-root objective terms and their mixed-type duals.
//!
//! The library discretizes problems of the form
//!
//! ```text
//! minimize  ( ∫ f¹(t,x,ẋ,ẍ) + (xᵀB¹x)^½ dt , … , ∫ fᵖ(t,x,ẋ,ẍ) + (xᵀBᵖx)^½ dt )
//! subject to g(t,x,ẋ,ẍ) ≤ 0 on I = [a,b],  boundary conditions on x and ẋ
//! ```
//!
//! on a uniform grid, solves scalarizations of the discretized problem,
//! constructs the mixed-type dual induced by a partition of the constraint
//! index set, and verifies weak/strong/converse duality together with the
//! pseudo/quasi-invexity hypotheses those results rest on.
//!
//! Module map:
//! - [`grid`] — uniform grids, finite-difference operators, quadrature.
//! - [`expr`] — integrand expressions with exact forward-mode derivatives.
//! - [`problem`] — the primal model, feasibility, objective evaluation.
//! - [`catalog`] — built-in test problems (P1, P2, P2-natural, P3, S1).
//! - [`dual`] — partitions, the mixed dual, duality residual checks.
//! - [`solver`] — augmented-Lagrangian NLP solver for the discretized primal.
//! - [`invexity`] — sampling-based certification of invexity hypotheses.
//! - [`recovery`] — multiplier recovery and strong/converse duality checks.
//! - [`cli`] — batch experiment driver behind the `mixdual` binary.

pub mod catalog;
pub mod cli;
pub mod dual;
pub mod error;
pub mod expr;
pub mod grid;
pub mod invexity;
pub mod linalg;
pub mod problem;
pub mod recovery;
pub mod report;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
