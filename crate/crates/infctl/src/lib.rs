//! Experiments and verification on top of `infctl-core`: configuration,
//! file formats, Monte Carlo estimation and the acceptance suite.

// Negated float comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod verify;
pub mod suite;
