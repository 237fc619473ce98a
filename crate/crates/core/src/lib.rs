//! Singular stochastic control of a one-dimensional diffusion together with
//! its controlled running infimum.
//!
//! The crate is `no_std` (with `alloc`) unless the default `std` feature is
//! enabled; the only thing `std` adds is the `std::error::Error` impl. All
//! transcendental functions go through `libm`, so results are bit-identical
//! with and without `std`.
//!
//! Layout:
//!
//! * [`model`]: dividend model parameters, characteristic roots, closed-form
//!   value functions and region classification.
//! * [`boundary`]: the infimum-dependent free boundary `b(i)` and the
//!   critical level `i*`.
//! * [`integrals`]: the control (diamond) and infimum (box) path integrals,
//!   their running-supremum duals and the three-term payoff functional.
//! * [`sim`]: Euler simulation of the controlled pair under barrier policies.
//! * [`rng`]: counter-based normal variates.
#![cfg_attr(not(feature = "std"), no_std)]
// Negated float comparisons are deliberate: they reject NaN along with
// out-of-range values. Quadrature nodes are kept at full published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

extern crate alloc;

pub mod boundary;
mod error;
pub mod integrals;
pub mod model;
pub mod quad;
pub mod rng;
pub mod sim;

pub use boundary::{boundary_at, critical_infimum, flow, solve_boundary, BoundaryTable};
pub use error::{Error, Result};
pub use integrals::{
    box_integral, box_integral_sup, diamond_integral, diamond_integral_sup, payoff_functional,
    ExpAffine, JumpEvent, Mirrored, PathBuilder, SamplePath, ScalarField,
};
pub use model::{
    char_roots, classical_value, classify_region, gradient_constraint_gap, value, CharRoots,
    ModelParams, Region,
};
pub use sim::{
    initial_lump, path_support_check, Absorption, simulate_path, simulate_path_into, Policy, SimConfig,
    SupportReport,
};
