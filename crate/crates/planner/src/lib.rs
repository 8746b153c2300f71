//! Receding-horizon planner that keeps the analytic collision-probability
//! bound below a threshold while tracking speed and lane references.
//!
//! Layers, bottom to top:
//!
//! * [`dynamics`] — kinematic vehicle model with first-order actuator lags,
//!   integrated by fixed-step RK4.
//! * [`qp`] — dense operator-splitting solver for box-constrained quadratic
//!   programs, with warm starts and an infeasibility certificate.
//! * [`ocp`] — SQP on the condensed input sequence; keep-out constraints
//!   either linearize the probability bound directly or use precomputed
//!   convex corridor lines.
//! * [`ov`] — other-vehicle behavior models, prediction, and uncertainty
//!   schedules.
//! * [`sim`] — closed-loop simulation with per-step safety auditing and
//!   seeded batch runs.

pub mod dynamics;
pub mod ocp;
pub mod ov;
pub mod qp;
pub mod sim;

pub use dynamics::{rk4_step, rollout, ControlInput, EgoState, TAU_ACCEL, TAU_YAW};
pub use ocp::{
    solve_ocp, OcpSetup, PathConstraint, PlanResult, PlannerParams, SolverStatus, StepBound,
};
pub use ov::{
    ov_predict, ov_step, IdmParams, LateralGains, OvBehavior, OvSpec, OvState,
    UncertaintySchedule,
};
pub use qp::{solve_qp, QpProblem, QpSettings, QpSolution, QpStatus};
pub use sim::{
    batch_run, batch_run_seq, run_closed_loop, EgoSpec, PlannerMode, RunResult, RunSummary,
    Scenario, StepRecord,
};
