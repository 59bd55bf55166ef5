//! Exponential decay rates for random walks that must stay in the positive
//! orthant.
//!
//! For a finitely supported increment law μ the crate computes the reduced
//! support and the infimum of the Laplace transform over the orthant, and
//! estimates survival probabilities with exact dynamic programming, truncated
//! spectral radii and (tilted) Monte Carlo. The [`polyhedron`] module holds
//! exact routines on minimal points of standard-form polyhedra.

pub mod cli;
pub mod distribution;
pub mod exact;
pub mod exec;
pub mod laplace;
pub mod lp;
pub mod optimizer;
pub mod polyhedron;
pub mod rates;
pub mod rational;
pub mod reduction;
