//! Dimension theory of projected ergodic measures on self-similar sets.
//!
//! The crate covers affine IFS machinery ([`ifs`]), the affine-map separation
//! scan ([`separation`]), Bernoulli/Markov symbol measures ([`measure`]), the
//! blocked Bernoulli coarse-graining ([`coarse`]), the `τ(q)` moment equation
//! ([`lq`]), closed-form dimension predictions ([`formulas`]) and Monte Carlo
//! estimators that check those predictions ([`estimate`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coarse;
pub mod error;
pub mod estimate;
pub mod formulas;
pub mod ifs;
pub mod lq;
pub mod measure;
pub mod number;
pub mod rng;
pub mod sample;
pub mod separation;

pub use error::{Error, Result};
pub use ifs::{AffineMap, AnyIfs, Ifs, Interval, Word};
pub use measure::{MeasureStats, SymbolicMeasure};
pub use number::{Approx, Exact, Literal, NumberMode, Real};
