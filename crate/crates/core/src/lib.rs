//! Distributed constrained optimization over an undirected agent network.
//!
//! Every agent `i` owns a scalar decision `x_i`, a private strictly convex cost
//! `f_i`, and a handful of local affine inequalities. The agents share affine
//! equality constraints `h_e(x) = sum_i (a_ie x_i + b_ie) = 0`. The engine
//! simulates a fully distributed continuous-time algorithm built from three
//! parts:
//!
//! * fast dynamic average consensus estimators that let every agent track
//!   the network averages of the constraint values and of the local
//!   equality multipliers,
//! * slow primal-dual (saddle-point) flows for `x`, the local multiplier
//!   copies `mu_ie`, and the inequality multipliers `lambda`,
//! * a small parameter `epsilon` separating the two time scales.
//!
//! Alongside the simulator the crate ships a centralized ground-truth oracle
//! (active-set KKT enumeration), KKT residuals, the Lagrangian, the Lyapunov
//! function of the reduced model and the boundary-layer matrix used to check
//! time-scale separation.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the CLI live
//! in the companion `dcop` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod dynamics;
pub mod graph;
pub mod linalg;
pub mod problem;
pub mod sim;

pub use analysis::{
    kkt_residual, lagrangian_value, lyapunov_value, solve_centralized, AnalysisError, KktReport,
    SaddlePoint,
};
pub use dynamics::{
    boundary_layer_matrix, consensus_rhs, full_rhs, reduced_rhs, DynamicsError, GainConfig,
    ReducedState, StateLayout, SystemState,
};
pub use graph::{orthonormal_complement, GraphError, NetworkGraph};
pub use linalg::Matrix;
pub use problem::{
    evaluate_constraints, psi_matrix, validate_assumptions, ConstraintId, EqualityConstraint,
    InequalityConstraint, Objective, ProblemError, ProblemSpec, Quadratic, ValidationReport,
};
pub use sim::{
    run, run_unchecked, step_rk4, sweep_epsilon, InitialState, Mode, Rk4, RunSummary, SimConfig,
    SimError, StepError, SweepResult, SweepRow, Trajectory,
};
