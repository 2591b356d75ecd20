//! The outer problem: choose consumption `c` and terminal wealth `xi` with
//! replication cost at most `x` to minimize the transformed value
//! `Ybar_0 = exp_q(-gamma Y_0)`.
//!
//! Every solve in this module steps the transformed BSDE with
//! [`StepScheme::CertaintyEquivalent`]. With that step the adjoint `Gamma`,
//! the worst-case density `D0` and the value process satisfy
//! `Gamma_k Ybar_k^q = Ybar_0^q (D0_k)^q` exactly on the lattice, so the
//! density form and the adjoint form of the maximum principle coincide
//! node by node and `Ybar_0` is convex in `(c, xi)`.

mod adjoint;
mod duality;
mod example;
mod fbsystem;
mod maxprinciple;
mod shooting;

pub use adjoint::{adjoints, exponential_gamma, AdjointPair};
pub use duality::{auxiliary_value, dual_function};
pub use example::{no_consumption_example, NoConsumptionReport};
pub use fbsystem::{solve_fb_system, FbOptions, FbSolution};
pub use maxprinciple::{
    max_principle_residuals, worst_case_density, MaxPrincipleResiduals, ResidualStats,
};
pub use shooting::{budget_of, shoot_for_budget, shoot_with, OptimizationReport, ShootingOptions};

use crate::bsde::StepScheme;

/// Scheme used by every solve of the outer problem.
pub const OUTER_SCHEME: StepScheme = StepScheme::CertaintyEquivalent;
