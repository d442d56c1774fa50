//! Executable Lyapunov theory for forward dynamical systems.
//!
//! A dynamical system is an action of a timeline (an ordered monoid with
//! unique differences) on a metric state space. On top of that action this
//! crate checks monovariants, attractors and equilibria, verifies and
//! composes Lyapunov certificates, and runs the converse construction that
//! turns a stability certificate back into a Lyapunov level-set family.
//!
//! Finite systems are handled with exact rational arithmetic and exhaustive
//! quantification, so their verdicts are [`Verdict::Proved`]. Euclidean
//! systems are explored over a bounded horizon and a finite cloud of sample
//! points, and their verdicts are [`Verdict::Sampled`].
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod certificates;
pub mod comparison;
mod error;
pub mod monovariant;
pub mod oracle;
pub mod quadratic;
pub mod scalar;
pub mod system;
pub mod timeline;
mod verdict;

pub use error::{Error, Result};
pub use verdict::Verdict;

pub use comparison::{ComparisonFunction, PiecewiseLinear, PowerLaw, PropertyTags};
pub use monovariant::{Direction, LevelSetFamily, Observable};
pub use scalar::{Rational, Value};
pub use system::{Dynamics, EuclideanSystem, FiniteMetric, FiniteSystem, Horizon, Point, Scope};
pub use timeline::{TimePoint, TimelineKind};
