//! Generator-level data of traceless character varieties attached to pointed
//! Heegaard diagrams.
//!
//! A diagram of genus `g` with three marked points determines a moduli space
//! of SU(2) tuples `(A_1, B_1, ..., A_g, B_g, C_1, C_2, C_3)` satisfying the
//! punctured-surface relation, together with a pair of Lagrangians cut out by
//! the attaching words of the two handlebodies.  This crate computes the
//! intersection of those Lagrangians numerically: it enumerates intersection
//! points, estimates component dimensions from constraint Jacobians, groups
//! samples into connected components, and cross-checks the results against
//! homological invariants of the underlying 3-manifold.
//!
//! The higher-rank analogue (SU(r) tuples with `r + 1` marked points in a
//! fixed conjugacy class) is implemented for the same diagram families in
//! [`sur`].

pub mod bordism;
pub mod census;
pub mod diagram;
pub mod error;
pub mod lm;
pub mod moduli;
pub mod quat;
pub mod report;
pub mod snf;
pub mod solver;
pub mod sur;
pub mod tol;
pub mod word;

pub use error::{Error, Result};
