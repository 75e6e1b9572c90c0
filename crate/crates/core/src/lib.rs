//! Numerical toolkit for the level proximal subdifferential of nonconvex,
//! prox-bounded functions of one variable and their separable sums.
//!
//! The crate offers closed forms for a catalog of functions ([`catalog`]),
//! grid oracles for envelopes, prox sets and proximal hulls ([`engine`]),
//! level proximal subdifferentials ([`subdiff`]), sampled tests of
//! variational convexity ([`diagnostics`]), recovery of the proximal hull
//! from subgradients ([`integrate`]) and the localized proximal gradient and
//! Krasnosel'skii-Mann iterations ([`solvers`]).

pub mod catalog;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod function;
pub mod integrate;
pub mod numeric;
pub mod resolve;
pub mod selftest;
pub mod solvers;
pub mod subdiff;
pub mod types;

pub use error::{Error, Result};
pub use function::{ScalarFn, SeparableFunction};
pub use resolve::Oracle;
pub use types::{setvalue_equal, ExtReal, Grid, SetValue};
