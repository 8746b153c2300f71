//! Analytic upper bounds on the collision probability between two vehicles
//! with jointly Gaussian planar position and heading uncertainty, plus the
//! machinery to turn a probability threshold into deterministic keep-out
//! boxes and convex driving corridors for a receding-horizon planner.
//!
//! The pipeline, bottom to top:
//!
//! * [`linalg`] — closed-form 2x2 symmetric eigendecomposition and the three
//!   covariance-decoupling transforms (principal-axes rotation, inverse
//!   matrix square root, rotation-scale-shear factorization).
//! * [`normal`] — standard normal pdf/cdf via a rational approximation of
//!   the complementary error function.
//! * [`geometry`] — rectangle hulls over heading intervals, Minkowski-sum
//!   combined boxes, transformed box dimensions, and an exact oriented
//!   rectangle overlap test.
//! * [`collision`] — heading-interval partitioning, the analytic probability
//!   upper bound itself, a seeded Monte Carlo estimator, and contour grids.
//! * [`convexify`] — Newton/bisection threshold search for tightened
//!   bounding boxes and per-step linear corridor constraints.
//!
//! With the default `parallel` feature the Monte Carlo estimator and grid
//! sweeps fan out over rayon; results are bitwise identical to the
//! sequential fallback and independent of worker count.

pub mod collision;
pub mod convexify;
mod exec;
pub mod geometry;
pub mod linalg;
pub mod normal;

pub use collision::{
    contour_grid, contour_grid_seq, decouple, derive_seed, mc_grid, monte_carlo_prob,
    monte_carlo_prob_seq, partition_heading, prob_upper_bound, BoundContext, DecoupleMethod,
    Decoupled, Gaussian2, GridSpec, HeadingStats, IntervalBox, McEstimate, ProbBound, VehicleDist,
};
pub use convexify::{
    build_corridor, pts_search, shift_plan, tightened_bbox, Corridor, CorridorStep, PlanPoint,
    PlanState, PtsParams, PtsResult, RoadBounds, SearchAxis, TightenedBox,
};
pub use geometry::{
    oriented_rect_overlap, wrap_angle, CombinedBox, HeadingInterval, Pose2, RectShape,
    TransformedBox,
};
pub use linalg::{Cov2, EigenPair2, RshFactors, ShearCase, Transform2};

/// Errors from covariance validation, decoupling, and threshold search.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("covariance not positive definite (sxx={sxx}, sxy={sxy}, syy={syy})")]
    NotPositiveDefinite { sxx: f64, sxy: f64, syy: f64 },
    #[error("covariance condition number {cond:.3e} exceeds cap {cap:.1e}")]
    IllConditioned { cond: f64, cap: f64 },
    #[error("threshold {delta:.3e} unreachable: bound is {at_zero:.3e} even at zero offset")]
    ThresholdUnreachable { delta: f64, at_zero: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
