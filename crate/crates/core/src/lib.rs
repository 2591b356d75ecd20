//! Robust consumption and terminal-wealth choice under Tsallis relative
//! entropy, solved on binomial lattices.
//!
//! The crate is organized bottom-up:
//!
//! - [`qcalc`]: q-logarithm, q-exponential and the `mu` coefficient.
//! - [`lattice`]: binomial market, adapted processes, pricing and replication.
//! - [`measures`]: measure changes, Tsallis relative entropy.
//! - [`bsde`]: transformed and quadratic BSDE solvers, derivative BSDE.
//! - [`robust`]: the inner worst-case problem over measures.
//! - [`optimal`]: adjoints, maximum principle, forward-backward system,
//!   budget shooting and the no-consumption example.
//! - [`scenario`]: batch configuration and CSV reports behind the binary.

// `!(x > 0.0)` is used throughout on purpose: it rejects NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsde;
pub mod error;
pub mod lattice;
pub mod measures;
pub mod optimal;
pub mod qcalc;
pub mod robust;
pub mod scenario;
pub mod utility;

pub use error::{Error, Result};
pub use lattice::{build_lattice, AdaptedProcess, LatticeModel, NodeId, Strategy};
pub use qcalc::QParams;
pub use utility::UtilitySpec;
