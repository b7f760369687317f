//! Numerical toolkit for Hopf fibrations and Lipschitz-minimal maps between
//! round spheres.
//!
//! The crate builds the classical Hopf projections (complex, quaternionic and
//! octonionic), Hopf vector fields and the Stiefel/Grassmann projection of
//! `V₂ℝ⁴`, and provides the machinery to interrogate them numerically:
//!
//! * [`fibers`] traces point-preimages of maps `S³ → S²(1/2)` by
//!   predictor–corrector continuation,
//! * [`linking`] computes linking numbers of the traced fibers two independent
//!   ways and assembles the Hopf invariant,
//! * [`lipschitz`] estimates Lipschitz constants, energies and curve lengths,
//! * [`verify`] bundles composite geometric checks into serializable reports.
//!
//! Everything is deterministic given a seed.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cli;
pub mod error;
pub mod fibers;
pub mod linalg;
pub mod linking;
pub mod lipschitz;
pub mod manifolds;
pub mod maps;
pub mod verify;

pub use error::{Error, Result};
