//! Constructive quantum Lovász local lemma.

// `!(x > 0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod conditions;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod instance;
pub mod limits;
pub mod linalg;
pub mod random;
pub mod scalar;
pub mod shearer;
pub mod solver;

pub use conditions::{Condition, ConditionReport, ResamplingBound, Witness};
pub use error::{Error, Result};
pub use instance::{DependencyGraph, Flaw, FlawSet, QsatInstance};
pub use limits::Limits;
pub use linalg::ComplexMatrix;
pub use scalar::{Real, C};

pub type Matrix64 = ComplexMatrix<f64>;
pub type Matrix32 = ComplexMatrix<f32>;
pub type Instance64 = QsatInstance<f64>;
pub type Instance32 = QsatInstance<f32>;
