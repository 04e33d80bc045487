//! Equipartitions of the unit segment under continuous, signed, non-additive
//! segment functions.
//!
//! Given `f` on the space of closed subsegments `[a,b] ⊆ [0,1]` with
//! `f([a,a]) = 0`, the solver finds cuts `0 = x0 ≤ x1 ≤ … ≤ xm = 1` such that
//! every part `[x(i-1), xi]` has the same value. The search runs a cascade over
//! the prime factorization of `m`: each stage turns the graph of a
//! multi-valued function on the cylinder `segments × [-1,1]` into the graph of
//! "splits into `p` parts lying on the previous graph at the same level". The
//! top stage is read off at the full segment, witnesses are unwound into cuts,
//! and a damped Newton iteration polishes them.
//!
//! Modules:
//! - [`segfunc`]: segments, segment functions, expressions, quadrature, rescaling
//! - [`envelope`]: partitions of a segment from lower envelopes of lines
//! - [`mvf`]: graph grids on the cylinder, separation and degeneracy checks,
//!   reconstruction of a boundary-respecting function from a graph
//! - [`cascade`]: level relations, witness-carrying composition, the stage stack
//! - [`solver`]: level selection, unwinding, Newton polish, end-to-end solve
//! - [`oracle`]: brute-force and multistart reference solvers
//! - [`cli`]: the batch command-line front end

pub mod cascade;
pub mod cli;
pub mod envelope;
mod error;
pub mod grid;
pub mod mvf;
pub mod oracle;
pub mod segfunc;
pub mod solver;

pub use error::{Error, Result};
pub use segfunc::{Segment, SegmentFunction};
pub use solver::{solve, PartitionWitness, SolveConfig};
