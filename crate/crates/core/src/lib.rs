//! A row-polymorphic type-and-effect calculus: inference, checking and
//! small-step evaluation with exceptions, divergence and isolated state.

pub mod check;
pub mod cli;
pub mod eval;
pub mod expr;
pub mod infer;
pub mod rows;
pub mod surface;
pub mod testkit;
pub mod types;
pub mod unify;
