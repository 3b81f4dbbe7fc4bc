//! Discrete branched optimal transport.
//!
//! Polyhedral 1-currents with exact rational multiplicities, an exhaustive
//! topology-enumeration solver for the α-mass problem, the flat norm on atomic
//! 0-currents and a set of perturbation experiments around uniqueness of
//! minimizers.

pub mod branch_opt;
pub mod currents;
pub mod error;
pub mod exec;
pub mod flat;
pub mod mcf;
pub mod topology;
pub mod geometry;
pub mod io;
pub mod local4;
pub mod perturbation;
pub mod rational;
pub mod solver;
pub mod svg;
pub mod sweep;

pub use currents::{Atom, Boundary, PolyhedralChain, Segment};
pub use error::{Error, Result};
pub use geometry::{Point, GEO_TOL};
pub use rational::Mult;
