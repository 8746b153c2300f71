//! Closed-loop simulation: replan every tick from the executed state, apply
//! the first input, advance the true vehicles, and audit each step with the
//! collision-probability bound and an exact overlap test.
//!
//! Runs are seeded: initial ego and other-vehicle states are drawn from
//! their belief distributions, and everything downstream is deterministic,
//! so a batch is reproducible bit for bit regardless of worker count.

use crate::dynamics::{rk4_step, rollout, ControlInput, EgoState, TAU_ACCEL, TAU_YAW};
use crate::ocp::{
    solve_ocp, OcpSetup, PathConstraint, PlannerParams, SolverStatus, StepBound,
};
use crate::ov::{ov_predict, ov_step, OvSpec, OvState};
use crate::qp::QpSolution;
use collision_bounds::{
    build_corridor, oriented_rect_overlap, shift_plan, tightened_bbox, BoundContext, BoundsError,
    Corridor, Cov2, DecoupleMethod, Gaussian2, HeadingStats, PlanPoint, Pose2, PtsParams,
    RectShape, RoadBounds, TightenedBox, VehicleDist,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Constraint-handling strategy for one batch of runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlannerMode {
    /// Linearize the probability bound inside the SQP, with the given
    /// covariance decoupling.
    Direct(DecoupleMethod),
    /// Corridor from principal-axes boxes.
    ConvexPa,
    /// Corridor from mixed unitary-scaling boxes (tightest certified pair).
    ConvexUs,
}

impl PlannerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerMode::Direct(DecoupleMethod::Pa) => "direct-pa",
            PlannerMode::Direct(DecoupleMethod::Us1) => "direct-us1",
            PlannerMode::Direct(DecoupleMethod::Us2) => "direct-us2",
            PlannerMode::ConvexPa => "convex-pa",
            PlannerMode::ConvexUs => "convex-us",
        }
    }

    pub fn parse(s: &str) -> Result<PlannerMode, String> {
        match s {
            "direct-pa" => Ok(PlannerMode::Direct(DecoupleMethod::Pa)),
            "direct-us1" => Ok(PlannerMode::Direct(DecoupleMethod::Us1)),
            "direct-us2" => Ok(PlannerMode::Direct(DecoupleMethod::Us2)),
            "convex-pa" => Ok(PlannerMode::ConvexPa),
            "convex-us" => Ok(PlannerMode::ConvexUs),
            other => Err(format!(
                "unknown mode '{other}'; expected direct-pa, direct-us1, direct-us2, convex-pa, or convex-us"
            )),
        }
    }
}

/// Ego vehicle description: nominal initial state, belief uncertainty
/// (shared by sampling and by every bound evaluation), and references.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoSpec {
    pub init: EgoState,
    pub shape: RectShape,
    pub pos_cov: Cov2,
    pub heading_var: f64,
    /// Lateral offset reference.
    pub r_y: f64,
    /// Speed reference.
    pub r_v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub road: RoadBounds,
    pub ego: EgoSpec,
    pub ovs: Vec<OvSpec>,
    /// Collision-probability threshold enforced per step and vehicle.
    pub delta: f64,
    /// Heading partition resolution for every bound evaluation.
    pub n_phi: usize,
    /// Closed-loop ticks to simulate.
    pub n_steps: usize,
}

/// One executed tick: the state after applying the input, the solver
/// outcome that produced the input, and the safety audit at the new state.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub t: f64,
    pub ego: EgoState,
    pub input: ControlInput,
    pub status: SolverStatus,
    pub solve_ms: f64,
    pub sqp_iterations: usize,
    pub fallback: bool,
    /// Post-hoc bound against each vehicle, in scenario order.
    pub bounds: Vec<f64>,
    pub collision: bool,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// True when no step had a geometric collision.
    pub success: bool,
    pub final_s: f64,
}

/// Per-run aggregates for tables and comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub success: bool,
    pub final_s: f64,
    pub max_bound: f64,
    pub fallback_steps: usize,
    pub feasible_steps: usize,
    pub median_solve_ms: f64,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        let max_bound = self
            .steps
            .iter()
            .flat_map(|s| s.bounds.iter().copied())
            .fold(0.0f64, f64::max);
        let solve_times: Vec<f64> = self
            .steps
            .iter()
            .filter(|s| s.sqp_iterations > 0)
            .map(|s| s.solve_ms)
            .collect();
        RunSummary {
            seed: self.seed,
            success: self.success,
            final_s: self.final_s,
            max_bound,
            fallback_steps: self.steps.iter().filter(|s| s.fallback).count(),
            feasible_steps: self
                .steps
                .iter()
                .filter(|s| s.status == SolverStatus::Feasible)
                .count(),
            median_solve_ms: median(&solve_times),
        }
    }
}

/// Median of a slice; NaN when empty, the average of the middle pair when
/// even-sized.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn chol2(c: &Cov2) -> [[f64; 2]; 2] {
    let l11 = c.sxx.sqrt();
    let l21 = c.sxy / l11;
    let l22 = (c.syy - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

/// Draws the run's initial conditions from the belief distributions. The
/// draw order (ego position pair, ego heading, then the same triple per
/// vehicle in scenario order) is part of the reproducibility contract.
pub fn sample_initial(sc: &Scenario, seed: u64) -> (EgoState, Vec<OvState>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw_pose = |cov: &Cov2, hvar: f64| -> (f64, f64, f64) {
        let l = chol2(cov);
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (l[0][0] * z0, l[1][0] * z0 + l[1][1] * z1, hvar.sqrt() * z2)
    };
    let (dx, dy, dphi) = draw_pose(&sc.ego.pos_cov, sc.ego.heading_var);
    let ego = EgoState {
        s: sc.ego.init.s + dx,
        y_e: sc.ego.init.y_e + dy,
        phi: sc.ego.init.phi + dphi,
        ..sc.ego.init
    };
    let ovs = sc
        .ovs
        .iter()
        .map(|spec| {
            let (cov, hvar) = spec.uncertainty.at(0.0);
            let (dx, dy, dphi) = draw_pose(&cov, hvar);
            OvState {
                s: spec.init.s + dx,
                y: spec.init.y + dy,
                phi: spec.init.phi + dphi,
                v: spec.init.v,
            }
        })
        .collect();
    (ego, ovs)
}

fn ego_belief_at(sc: &Scenario, s: f64, y_e: f64, phi: f64) -> VehicleDist {
    VehicleDist {
        pos: Gaussian2 { mean: [s, y_e], cov: sc.ego.pos_cov },
        heading: HeadingStats { mean: phi, var: sc.ego.heading_var },
        shape: sc.ego.shape,
    }
}

fn ov_dist_now(spec: &OvSpec, st: &OvState) -> VehicleDist {
    let (cov, hvar) = spec.uncertainty.at(0.0);
    VehicleDist {
        pos: Gaussian2 { mean: [st.s, st.y], cov },
        heading: HeadingStats { mean: st.phi, var: hvar },
        shape: spec.shape,
    }
}

/// Post-hoc bound at the executed state: the mode's own decoupling for
/// direct modes, principal axes for the principal-axes corridor, and the
/// tighter of the two unitary scalings for the mixed corridor.
fn posthoc_bound(
    mode: PlannerMode,
    ego: &VehicleDist,
    ov: &VehicleDist,
    n_phi: usize,
    deviation: [f64; 2],
) -> Result<f64, BoundsError> {
    let eval = |m: DecoupleMethod| -> Result<f64, BoundsError> {
        Ok(BoundContext::build(ego, ov, m, n_phi)?.eval(deviation))
    };
    match mode {
        PlannerMode::Direct(m) => eval(m),
        PlannerMode::ConvexPa => eval(DecoupleMethod::Pa),
        PlannerMode::ConvexUs => {
            Ok(eval(DecoupleMethod::Us1)?.min(eval(DecoupleMethod::Us2)?))
        }
    }
}

enum BuiltPath {
    Corridor(Corridor),
    Direct(Vec<Vec<StepBound>>),
}

/// A plan that missed the solver tolerances is still executed when its
/// worst residual violation is negligible at vehicle scale: replanning
/// from the executed state next tick beats braking open loop. Kinematic
/// rows are judged in meters and meters-per-second, bound rows as a
/// fraction of the per-step probability budget.
const ACCEPT_KIN: f64 = 0.05;
const ACCEPT_PROB_FRAC: f64 = 0.1;

/// Simulates one seeded run of the scenario under the given mode.
pub fn run_closed_loop(
    sc: &Scenario,
    mode: PlannerMode,
    params: &PlannerParams,
    seed: u64,
) -> Result<RunResult, BoundsError> {
    if !(sc.delta > 0.0 && sc.delta < 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "threshold must be in (0, 1), got {}",
            sc.delta
        )));
    }
    let n = params.horizon;
    let dt = params.dt;
    let (mut ego, mut ovs) = sample_initial(sc, seed);
    let mut prev_inputs = vec![ControlInput::default(); n];
    let mut prev_states = rollout(&ego, &prev_inputs, dt);
    let mut qp_warm: Option<QpSolution> = None;
    let mut steps = Vec::with_capacity(sc.n_steps);
    for k in 0..sc.n_steps {
        // Predict every vehicle over the horizon from its current state.
        let preds: Vec<Vec<VehicleDist>> = sc
            .ovs
            .iter()
            .zip(&ovs)
            .map(|(spec, st)| ov_predict(spec, st, n, dt))
            .collect();
        // Warm start: previous solution advanced by one tick.
        let prev_arrays: Vec<[f64; 6]> = prev_states.iter().map(|x| x.to_array()).collect();
        let shifted: Vec<EgoState> = shift_plan(&prev_arrays, dt, dt)
            .into_iter()
            .map(EgoState::from_array)
            .collect();
        let mut warm_inputs: Vec<ControlInput> = prev_inputs[1..].to_vec();
        warm_inputs.push(*prev_inputs.last().expect("horizon is nonempty"));
        let built = match mode {
            PlannerMode::ConvexPa | PlannerMode::ConvexUs => {
                let (m1, m2) = match mode {
                    PlannerMode::ConvexPa => (DecoupleMethod::Pa, DecoupleMethod::Pa),
                    _ => (DecoupleMethod::Us2, DecoupleMethod::Us1),
                };
                let pts = PtsParams::new(sc.delta);
                let mut boxes_per_step: Vec<Vec<TightenedBox>> = Vec::with_capacity(n + 1);
                for (j, plan_state) in shifted.iter().enumerate() {
                    let ego_j = ego_belief_at(sc, plan_state.s, plan_state.y_e, plan_state.phi);
                    let mut boxes = Vec::new();
                    for pred in &preds {
                        match tightened_bbox(&ego_j, &pred[j], sc.n_phi, m1, m2, &pts) {
                            Ok(bx) => boxes.push(bx),
                            // Bound below the threshold even at zero
                            // offset: nothing to keep out of.
                            Err(BoundsError::ThresholdUnreachable { .. }) => {}
                            Err(e) => return Err(e),
                        }
                    }
                    boxes_per_step.push(boxes);
                }
                let plan_pts: Vec<PlanPoint> =
                    shifted.iter().map(|x| PlanPoint { s: x.s, y_e: x.y_e }).collect();
                BuiltPath::Corridor(build_corridor(
                    &plan_pts,
                    &boxes_per_step,
                    &sc.road,
                    params.delta_s,
                ))
            }
            PlannerMode::Direct(method) => {
                let mut per_ov = Vec::with_capacity(preds.len());
                for pred in &preds {
                    let mut rows = Vec::with_capacity(n + 1);
                    for (j, plan_state) in shifted.iter().enumerate() {
                        let ego_j =
                            ego_belief_at(sc, plan_state.s, plan_state.y_e, plan_state.phi);
                        let ctx = BoundContext::build(&ego_j, &pred[j], method, sc.n_phi)?;
                        rows.push(StepBound { ctx, ov_mean: pred[j].pos.mean });
                    }
                    per_ov.push(rows);
                }
                BuiltPath::Direct(per_ov)
            }
        };
        // Solve unless the corridor already collapsed.
        let result = match &built {
            BuiltPath::Corridor(c) if !c.all_feasible() => None,
            _ => {
                let path = match &built {
                    BuiltPath::Corridor(c) => PathConstraint::Corridor(c),
                    BuiltPath::Direct(per_ov) => {
                        PathConstraint::Bounds { per_ov, delta: sc.delta }
                    }
                };
                let setup = OcpSetup {
                    x0: ego,
                    warm_inputs: &warm_inputs,
                    r_y: sc.ego.r_y,
                    r_v: sc.ego.r_v,
                    road: sc.road,
                    path,
                };
                Some(solve_ocp(&setup, params, &mut qp_warm))
            }
        };
        let usable = result
            .as_ref()
            .map(|r| match r.status {
                SolverStatus::Feasible => true,
                SolverStatus::IterationLimit => {
                    r.kin_violation <= ACCEPT_KIN
                        && r.prob_violation <= ACCEPT_PROB_FRAC * sc.delta
                }
                _ => false,
            })
            .unwrap_or(false);
        let (input, status, solve_ms, sqp_iterations, fallback);
        if usable {
            let r = result.expect("a usable plan implies a solve happened");
            input = r.inputs[0];
            status = r.status;
            solve_ms = r.solve_ms;
            sqp_iterations = r.sqp_iterations;
            prev_states = r.states;
            prev_inputs = r.inputs;
            fallback = false;
        } else {
            // Brake to a stop and level the heading. Both commands
            // compensate their actuator lags (critically damped), so speed
            // settles at zero without undershooting into reverse and the
            // vehicle straightens out instead of replaying a steering
            // profile planned for a speed it no longer has.
            let mut fb_inputs = Vec::with_capacity(n);
            let mut fb_states = Vec::with_capacity(n + 1);
            let mut x = ego;
            fb_states.push(x);
            for _ in 0..n {
                let u = ControlInput {
                    a_d: (-2.0 * (x.v + TAU_ACCEL * x.a))
                        .clamp(-params.a_d_max, params.a_d_max),
                    gamma_d: (-2.0 * (x.phi + TAU_YAW * x.gamma))
                        .clamp(-params.gamma_d_max, params.gamma_d_max),
                };
                fb_inputs.push(u);
                x = rk4_step(&x, &u, dt);
                fb_states.push(x);
            }
            input = fb_inputs[0];
            (status, solve_ms, sqp_iterations) = match result {
                Some(r) => (r.status, r.solve_ms, r.sqp_iterations),
                None => (SolverStatus::Infeasible, 0.0, 0),
            };
            prev_states = fb_states;
            prev_inputs = fb_inputs;
            fallback = true;
            qp_warm = None;
        }
        // Execute one tick on the true system.
        ego = rk4_step(&ego, &input, dt);
        for (spec, st) in sc.ovs.iter().zip(ovs.iter_mut()) {
            *st = ov_step(st, &spec.behavior, dt);
        }
        // Audit the new state.
        let ego_now = ego_belief_at(sc, ego.s, ego.y_e, ego.phi);
        let ego_pose = Pose2 { x: ego.s, y: ego.y_e, heading: ego.phi };
        let mut bounds = Vec::with_capacity(sc.ovs.len());
        let mut collision = false;
        for (spec, st) in sc.ovs.iter().zip(&ovs) {
            let ov_d = ov_dist_now(spec, st);
            bounds.push(posthoc_bound(
                mode,
                &ego_now,
                &ov_d,
                sc.n_phi,
                [ego.s - st.s, ego.y_e - st.y],
            )?);
            let ov_pose = Pose2 { x: st.s, y: st.y, heading: st.phi };
            collision |= oriented_rect_overlap(&ego_pose, &sc.ego.shape, &ov_pose, &spec.shape);
        }
        steps.push(StepRecord {
            t: (k + 1) as f64 * dt,
            ego,
            input,
            status,
            solve_ms,
            sqp_iterations,
            fallback,
            bounds,
            collision,
        });
    }
    let success = steps.iter().all(|s| !s.collision);
    Ok(RunResult { seed, steps, success, final_s: ego.s })
}

/// Runs `n_runs` seeded simulations sequentially; run `i` uses seed
/// `base_seed + i`.
pub fn batch_run_seq(
    sc: &Scenario,
    mode: PlannerMode,
    params: &PlannerParams,
    base_seed: u64,
    n_runs: usize,
) -> Result<Vec<RunResult>, BoundsError> {
    (0..n_runs)
        .map(|i| run_closed_loop(sc, mode, params, base_seed.wrapping_add(i as u64)))
        .collect()
}

/// Parallel batch with the same seeds and ordering as [`batch_run_seq`];
/// results are identical bit for bit.
#[cfg(feature = "parallel")]
pub fn batch_run(
    sc: &Scenario,
    mode: PlannerMode,
    params: &PlannerParams,
    base_seed: u64,
    n_runs: usize,
) -> Result<Vec<RunResult>, BoundsError> {
    use rayon::prelude::*;
    (0..n_runs)
        .into_par_iter()
        .map(|i| run_closed_loop(sc, mode, params, base_seed.wrapping_add(i as u64)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn batch_run(
    sc: &Scenario,
    mode: PlannerMode,
    params: &PlannerParams,
    base_seed: u64,
    n_runs: usize,
) -> Result<Vec<RunResult>, BoundsError> {
    batch_run_seq(sc, mode, params, base_seed, n_runs)
}
