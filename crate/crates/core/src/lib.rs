//! Shooting solver for radial Neumann problems driven by the mean curvature
//! operator in Lorentz-Minkowski space,
//!
//! ```text
//! -div( grad u / sqrt(1 - |grad u|^2) ) = f(u)  in B_R,   du/dnu = 0 on the boundary,
//! ```
//!
//! with `f` vanishing at 0 and 1. Radial solutions are found by shooting from
//! `u(0) = d`, counting half-turns of `(u, v)` around the equilibrium `(1, 0)`
//! and root-finding on `v(R)`.
//!
//! All numerics are generic over [`Real`]: `f32`, `f64`, the double-double
//! [`DoubleDouble`] or the octuple [`Octuple`]. The `*64` aliases below fix
//! the double-precision instantiation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod double_double;
pub mod error;
pub mod integrator;
pub mod model;
pub mod octuple;
pub mod ode;
pub mod scalar;
pub mod shooter;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use integrator::{
    count_zeros, half_turns, integrate_shoot, polar_unwrap, rhs_auxiliary, rhs_original,
    taylor_start, IntegratorSettings, System, Trajectory,
};
pub use model::{
    eval_phi, eval_phi_inv, NonlinearitySpec, NonlinearityTag, Problem, ProblemConfig,
    TruncationData,
};
pub use double_double::DoubleDouble;
pub use octuple::Octuple;
pub use scalar::Real;
pub use shooter::{
    estimate_threshold_radius, find_peak, find_solutions, scan, BranchLabel, BranchResult,
    ScanOptions, ScanResult, ShotRecord, Side, SolutionSet, ThresholdEstimate,
};
pub use spectrum::{eigenvalue, pruefer_angle_at_r, EigenResult};
pub use verify::{run_check, run_checks, CheckName, CheckReport, SuiteInputs};

pub type Problem64 = Problem<f64>;
pub type Problem32 = Problem<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Settings64 = IntegratorSettings<f64>;
pub type Branch64 = BranchResult<f64>;
pub type Solutions64 = SolutionSet<f64>;
pub type Scan64 = ScanResult<f64>;

pub type ProblemDD = Problem<DoubleDouble>;
pub type SettingsDD = IntegratorSettings<DoubleDouble>;
pub type SolutionsDD = SolutionSet<DoubleDouble>;
