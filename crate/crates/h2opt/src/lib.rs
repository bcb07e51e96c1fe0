//! A compact linear / mixed-integer optimization toolkit.
//!
//! The crate provides a solver-agnostic sparse model container
//! ([`MilpModel`]), an LP solver based on a bounded-variable revised
//! simplex ([`solve_lp`]), a deterministic branch-and-bound MILP solver
//! ([`solve_milp`]), a Dinkelbach iteration for linear-fractional
//! objectives ([`solve_fractional`]) and a free-format MPS writer
//! ([`write_mps`]).

mod branch_bound;
mod error;
mod fractional;
mod model;
mod mps;
mod simplex;

pub use branch_bound::{solve_milp, MilpOptions, MilpResult, MilpStatus};
pub use error::SolverError;
pub use fractional::{solve_fractional, FractionalResult};
pub use model::{Column, MilpModel, Row, RowSense, VarKind};
pub use mps::write_mps;
pub use simplex::{solve_lp, solve_lp_with_bounds, LpSolution, LpStatus};
