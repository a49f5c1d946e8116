//! Shared numerical tolerances.
//!
//! Every module draws its thresholds from here so that a tolerance change is
//! a one-line edit.  The values fall into three tiers: machine-level checks
//! on algebraic identities, solver convergence targets, and geometric radii
//! used when comparing or grouping solutions.

/// A group element must be unit-norm to this accuracy after renormalization.
pub const UNIT_NORM: f64 = 1e-12;

/// Constructors reject inputs whose norm is further than this from 1.
pub const UNIT_NORM_REJECT: f64 = 1e-6;

/// Membership tests for conjugacy classes, tracelessness and relations.
pub const MEMBERSHIP: f64 = 1e-9;

/// Approximate equality of group elements and of whole tuples.
pub const EQUALITY: f64 = 1e-9;

/// A refined point counts as a solution when its residual is below this.
pub const CONVERGE: f64 = 1e-12;

/// Refined points closer than this are the same solution.
pub const DEDUP_RADIUS: f64 = 1e-6;

/// Proximity radius for the base layer of component clustering.
pub const CLUSTER_RADIUS: f64 = 1e-3;

/// Relative singular-value cutoff for numerical rank of a Jacobian.
pub const RANK_REL: f64 = 1e-6;

/// Step size for central-difference Jacobian columns.
pub const FD_STEP: f64 = 1e-6;

/// Iteration cap for one refinement.
pub const MAX_ITERATIONS: usize = 200;

/// Chord step length when probing whether two samples lie on one component.
pub const BRIDGE_STEP: f64 = 0.05;

/// Largest jump allowed between consecutive refined chord points before the
/// probe concludes the samples sit on different components.
pub const BRIDGE_GAP: f64 = 0.25;

/// Trace signatures are considered constant on a component when every sample
/// agrees with the representative to this accuracy.
pub const SIGNATURE_SPREAD: f64 = 1e-6;
