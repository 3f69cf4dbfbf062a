//! Numerical lab for one-dimensional reflected backward doubly stochastic
//! differential equations with possibly discontinuous generators.
//!
//! The pipeline: sample or enumerate noise ([`noise`]), describe a problem
//! ([`model`]), audit its hypotheses ([`audit`]), regularise the generator
//! ([`envelope`]), and solve by backward induction ([`solver`]) inside a
//! monotone iteration ([`scheme`]).

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod cli;
pub mod condexp;
pub mod dump;
pub mod envelope;
pub mod error;
pub mod model;
pub mod noise;
pub mod scheme;
pub mod solver;
pub mod verify;

pub use error::{Error, Result, Witness};
