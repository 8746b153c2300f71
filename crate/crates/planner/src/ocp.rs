//! Receding-horizon optimal control: sequential quadratic programming over
//! the condensed input sequence.
//!
//! Each iteration rolls the dynamics out, differentiates them by central
//! finite differences, chains per-step sensitivities of every state to
//! every input, and solves one dense quadratic program for the input
//! correction. Keep-out constraints come in two flavors: direct
//! linearization of the collision-probability bound, or precomputed convex
//! corridor lines.

use crate::dynamics::{rk4_step, rollout, ControlInput, EgoState};
use crate::qp::{solve_qp, QpProblem, QpSettings, QpSolution, QpStatus};
use collision_bounds::{BoundContext, Corridor, RoadBounds};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

/// Cost weights, limits, and solver knobs. Defaults are the tuned values
/// used by the shipped scenarios.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerParams {
    pub dt: f64,
    pub horizon: usize,
    /// Lateral tracking weight on `y_e - r_y`.
    pub q_y: f64,
    /// Speed tracking weight on `v - r_v`.
    pub q_v: f64,
    /// Input weight on commanded acceleration.
    pub r_a: f64,
    /// Input weight on commanded yaw rate.
    pub r_gamma: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_d_max: f64,
    pub gamma_d_max: f64,
    /// Lateral acceleration cap `|v * gamma|`.
    pub friction_max: f64,
    /// Half-length of each corridor step's path-position range.
    pub delta_s: f64,
    pub sqp_iters: usize,
    /// Initial trust-region radius as a fraction of the input limits.
    pub trust0: f64,
    pub qp: QpSettings,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            dt: 0.15,
            horizon: 40,
            q_y: 1.0,
            q_v: 0.5,
            r_a: 0.1,
            r_gamma: 1.0,
            v_min: 0.0,
            v_max: 30.0,
            a_d_max: 4.0,
            gamma_d_max: 0.5,
            friction_max: 0.7 * 9.81,
            delta_s: 30.0,
            sqp_iters: 8,
            trust0: 0.5,
            qp: QpSettings { max_iter: 2000, ..QpSettings::default() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    Feasible,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Feasible => "feasible",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::IterationLimit => "iteration_limit",
            SolverStatus::NumericalFailure => "numerical_failure",
        }
    }
}

/// One vehicle's frozen bound context and predicted mean for one step.
#[derive(Clone, Debug)]
pub struct StepBound {
    pub ctx: BoundContext,
    pub ov_mean: [f64; 2],
}

/// Keep-out constraint flavor for one solve.
pub enum PathConstraint<'a> {
    /// Convex corridor lines, one step each (length `horizon + 1`).
    Corridor(&'a Corridor),
    /// Per-vehicle bound contexts (outer: vehicle; inner: step, length
    /// `horizon + 1`), constrained to stay at or below `delta`.
    Bounds { per_ov: &'a [Vec<StepBound>], delta: f64 },
}

pub struct OcpSetup<'a> {
    pub x0: EgoState,
    /// Initial input iterate, usually the shifted previous solution.
    pub warm_inputs: &'a [ControlInput],
    pub r_y: f64,
    pub r_v: f64,
    pub road: RoadBounds,
    pub path: PathConstraint<'a>,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub states: Vec<EgoState>,
    pub inputs: Vec<ControlInput>,
    pub status: SolverStatus,
    /// Worst kinematic or geometric constraint excess along the returned
    /// rollout, in meters or meters-per-second.
    pub kin_violation: f64,
    /// Worst probability-bound excess along the returned rollout.
    pub prob_violation: f64,
    pub solve_ms: f64,
    pub sqp_iterations: usize,
}

/// Feasibility tolerances for the nonlinear rollout check: meters and
/// meters-per-second for kinematic rows, absolute probability for bound
/// rows.
const KIN_TOL: f64 = 1e-4;
const PROB_TOL: f64 = 1e-9;

/// Merit-function penalty weights; these also price the quadratic
/// program's slack columns (the shared kinematic slack and the direct-mode
/// bound slacks), so the quadratic model trades violation against cost the
/// same way the merit does.
const KIN_WEIGHT: f64 = 1e4;
const PROB_WEIGHT: f64 = 1e5;

fn fd_jacobians(x: &EgoState, u: &ControlInput, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(6, 6);
    let xa = x.to_array();
    for j in 0..6 {
        let h = 1e-6 * (1.0 + xa[j].abs());
        let mut xp = xa;
        let mut xm = xa;
        xp[j] += h;
        xm[j] -= h;
        let fp = rk4_step(&EgoState::from_array(xp), u, dt).to_array();
        let fm = rk4_step(&EgoState::from_array(xm), u, dt).to_array();
        for i in 0..6 {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let mut b = DMatrix::zeros(6, 2);
    let ua = [u.a_d, u.gamma_d];
    for j in 0..2 {
        let h = 1e-6 * (1.0 + ua[j].abs());
        let mut up = ua;
        let mut um = ua;
        up[j] += h;
        um[j] -= h;
        let fp = rk4_step(x, &ControlInput { a_d: up[0], gamma_d: up[1] }, dt).to_array();
        let fm = rk4_step(x, &ControlInput { a_d: um[0], gamma_d: um[1] }, dt).to_array();
        for i in 0..6 {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    (a, b)
}

/// Input-to-state sensitivities along the rollout: `gamma[k]` maps the
/// stacked input correction to the state correction at step `k`.
fn sensitivities(states: &[EgoState], inputs: &[ControlInput], dt: f64) -> Vec<DMatrix<f64>> {
    let n = inputs.len();
    let nu = 2 * n;
    let mut gamma = Vec::with_capacity(n + 1);
    gamma.push(DMatrix::zeros(6, nu));
    for k in 0..n {
        let (a, b) = fd_jacobians(&states[k], &inputs[k], dt);
        let mut next = &a * &gamma[k];
        for i in 0..6 {
            for j in 0..2 {
                next[(i, 2 * k + j)] += b[(i, j)];
            }
        }
        gamma.push(next);
    }
    gamma
}

fn tracking_cost(states: &[EgoState], inputs: &[ControlInput], p: &PlannerParams, r_y: f64, r_v: f64) -> f64 {
    let mut j = 0.0;
    for x in &states[1..] {
        j += p.q_y * (x.y_e - r_y).powi(2) + p.q_v * (x.v - r_v).powi(2);
    }
    for u in inputs {
        j += p.r_a * u.a_d.powi(2) + p.r_gamma * u.gamma_d.powi(2);
    }
    j
}

/// Worst violations of the nonlinear constraints along a rollout:
/// `(kinematic/geometric excess, probability excess)`.
fn violations(
    states: &[EgoState],
    inputs: &[ControlInput],
    p: &PlannerParams,
    setup: &OcpSetup,
) -> (f64, f64) {
    let mut kin = 0.0f64;
    let mut prob = 0.0f64;
    for u in inputs {
        kin = kin.max(u.a_d.abs() - p.a_d_max).max(u.gamma_d.abs() - p.gamma_d_max);
    }
    for (k, x) in states.iter().enumerate().skip(1) {
        kin = kin
            .max(p.v_min - x.v)
            .max(x.v - p.v_max)
            .max((x.v * x.gamma).abs() - p.friction_max);
        match &setup.path {
            PathConstraint::Corridor(c) => {
                let st = &c.steps[k];
                kin = kin
                    .max(x.y_e - st.upper_at(x.s))
                    .max(st.lower_at(x.s) - x.y_e)
                    .max(st.s_lo - x.s)
                    .max(x.s - st.s_hi);
            }
            PathConstraint::Bounds { per_ov, delta } => {
                kin = kin.max(setup.road.y_lo - x.y_e).max(x.y_e - setup.road.y_hi);
                for ov in per_ov.iter() {
                    let sb = &ov[k];
                    let b = sb.ctx.eval([x.s - sb.ov_mean[0], x.y_e - sb.ov_mean[1]]);
                    prob = prob.max(b - delta);
                }
            }
        }
    }
    (kin, prob)
}

struct Assembled {
    qp: QpProblem,
}

fn assemble(
    states: &[EgoState],
    inputs: &[ControlInput],
    gamma: &[DMatrix<f64>],
    p: &PlannerParams,
    setup: &OcpSetup,
    trust: f64,
) -> Assembled {
    let n = inputs.len();
    let nu = 2 * n;
    // Direct mode relaxes each bound row with a nonnegative slack priced
    // at the merit's probability weight, so the program stays feasible
    // even when the current iterate violates the bound badly.
    let ns = match &setup.path {
        PathConstraint::Corridor(_) => 0,
        PathConstraint::Bounds { per_ov, .. } => per_ov.len() * n,
    };
    let nv = nu + ns;
    // Cost: H = 2 (M'M + R), g = 2 (M' r + R u) with M the weighted
    // tracking rows stacked over steps.
    let mut m = DMatrix::zeros(2 * n, nu);
    let mut resid = DVector::zeros(2 * n);
    let (wy, wv) = (p.q_y.sqrt(), p.q_v.sqrt());
    for k in 1..=n {
        for c in 0..nu {
            m[(2 * (k - 1), c)] = wy * gamma[k][(1, c)];
            m[(2 * (k - 1) + 1, c)] = wv * gamma[k][(3, c)];
        }
        resid[2 * (k - 1)] = wy * (states[k].y_e - setup.r_y);
        resid[2 * (k - 1) + 1] = wv * (states[k].v - setup.r_v);
    }
    let mut h = DMatrix::zeros(nv, nv);
    h.view_mut((0, 0), (nu, nu))
        .copy_from(&(2.0 * m.transpose() * &m));
    let mut g = DVector::zeros(nv);
    g.rows_mut(0, nu).copy_from(&(2.0 * m.transpose() * resid));
    for k in 0..n {
        h[(2 * k, 2 * k)] += 2.0 * p.r_a;
        h[(2 * k + 1, 2 * k + 1)] += 2.0 * p.r_gamma;
        g[2 * k] += 2.0 * p.r_a * inputs[k].a_d;
        g[2 * k + 1] += 2.0 * p.r_gamma * inputs[k].gamma_d;
    }
    for j in 0..ns {
        h[(nu + j, nu + j)] = 2e-6;
        g[nu + j] = PROB_WEIGHT;
    }
    // Constraint rows.
    let per_step = match &setup.path {
        PathConstraint::Corridor(_) => 5,
        PathConstraint::Bounds { per_ov, .. } => 3 + per_ov.len(),
    };
    let rows = 2 * n + per_step * n + ns;
    let mut a = DMatrix::zeros(rows, nv);
    let mut l = DVector::from_element(rows, f64::NEG_INFINITY);
    let mut u = DVector::from_element(rows, f64::INFINITY);
    // Input boxes intersected with the trust region; when they conflict
    // (the iterate sits outside a box by more than the radius) the box
    // side wins so the correction is pulled back toward feasibility.
    let (cap_a, cap_g) = (trust * p.a_d_max, trust * p.gamma_d_max);
    let intersect = |limit: f64, cur: f64, cap: f64| -> (f64, f64) {
        let hi = (limit - cur).min(cap);
        let lo = (-limit - cur).max(-cap).min(hi);
        (lo, hi.max(lo))
    };
    for k in 0..n {
        a[(2 * k, 2 * k)] = 1.0;
        (l[2 * k], u[2 * k]) = intersect(p.a_d_max, inputs[k].a_d, cap_a);
        a[(2 * k + 1, 2 * k + 1)] = 1.0;
        (l[2 * k + 1], u[2 * k + 1]) = intersect(p.gamma_d_max, inputs[k].gamma_d, cap_g);
    }
    let mut r = 2 * n;
    let mut slack = 0;
    for k in 1..=n {
        let x = &states[k];
        let gk = &gamma[k];
        // Speed bounds.
        for c in 0..nu {
            a[(r, c)] = gk[(3, c)];
        }
        l[r] = p.v_min - x.v;
        u[r] = p.v_max - x.v;
        r += 1;
        // Linearized lateral-acceleration cap: d(v*gamma) = gamma dv +
        // v dgamma.
        let c0 = x.v * x.gamma;
        for c in 0..nu {
            a[(r, c)] = x.gamma * gk[(3, c)] + x.v * gk[(5, c)];
        }
        l[r] = -p.friction_max - c0;
        u[r] = p.friction_max - c0;
        r += 1;
        match &setup.path {
            PathConstraint::Corridor(corr) => {
                let st = &corr.steps[k];
                // y - alpha_hi s <= beta_hi.
                for c in 0..nu {
                    a[(r, c)] = gk[(1, c)] - st.alpha_hi * gk[(0, c)];
                }
                u[r] = st.alpha_hi * x.s + st.beta_hi - x.y_e;
                r += 1;
                // y - alpha_lo s >= beta_lo.
                for c in 0..nu {
                    a[(r, c)] = gk[(1, c)] - st.alpha_lo * gk[(0, c)];
                }
                l[r] = st.alpha_lo * x.s + st.beta_lo - x.y_e;
                r += 1;
                // Path-position range.
                for c in 0..nu {
                    a[(r, c)] = gk[(0, c)];
                }
                l[r] = st.s_lo - x.s;
                u[r] = st.s_hi - x.s;
                r += 1;
            }
            PathConstraint::Bounds { per_ov, delta } => {
                // Road edges.
                for c in 0..nu {
                    a[(r, c)] = gk[(1, c)];
                }
                l[r] = setup.road.y_lo - x.y_e;
                u[r] = setup.road.y_hi - x.y_e;
                r += 1;
                for ov in per_ov.iter() {
                    let sb = &ov[k];
                    let (b0, grad) =
                        sb.ctx.eval_with_grad([x.s - sb.ov_mean[0], x.y_e - sb.ov_mean[1]]);
                    for c in 0..nu {
                        a[(r, c)] = grad[0] * gk[(0, c)] + grad[1] * gk[(1, c)];
                    }
                    a[(r, nu + slack)] = -1.0;
                    u[r] = delta - b0;
                    slack += 1;
                    r += 1;
                }
            }
        }
    }
    // Slack nonnegativity.
    for j in 0..ns {
        a[(r, nu + j)] = 1.0;
        l[r] = 0.0;
        r += 1;
    }
    debug_assert_eq!(r, rows);
    debug_assert_eq!(slack, ns);
    // Normalize each row to unit infinity norm so probability-scale and
    // meter-scale rows condition the splitting solver equally.
    for i in 0..rows {
        let mut s = 0.0f64;
        for c in 0..nv {
            s = s.max(a[(i, c)].abs());
        }
        if s > 1e-12 && s != 1.0 {
            for c in 0..nv {
                a[(i, c)] /= s;
            }
            if l[i].is_finite() {
                l[i] /= s;
            }
            if u[i].is_finite() {
                u[i] /= s;
            }
        }
    }
    Assembled { qp: QpProblem { h, g, a, l, u } }
}

pub fn solve_ocp(
    setup: &OcpSetup,
    params: &PlannerParams,
    qp_warm: &mut Option<QpSolution>,
) -> PlanResult {
    let t0 = Instant::now();
    let n = params.horizon;
    assert_eq!(setup.warm_inputs.len(), n, "warm input length must match the horizon");
    let mut inputs = setup.warm_inputs.to_vec();
    let mut states = rollout(&setup.x0, &inputs, params.dt);
    if let PathConstraint::Corridor(c) = &setup.path {
        assert_eq!(c.steps.len(), n + 1, "corridor must cover every plan step");
        // Crossed corridor lines mean the step's feasible set is empty by
        // construction; report that directly instead of relying on the
        // splitting solver's infeasibility certificate.
        if !c.all_feasible() {
            let (kin, prob) = violations(&states, &inputs, params, setup);
            return PlanResult {
                states,
                inputs,
                status: SolverStatus::Infeasible,
                kin_violation: kin,
                prob_violation: prob,
                solve_ms: t0.elapsed().as_secs_f64() * 1e3,
                sqp_iterations: 0,
            };
        }
    }
    let finite = |xs: &[EgoState]| xs.iter().all(|x| x.to_array().iter().all(|v| v.is_finite()));
    if !finite(&states) {
        return PlanResult {
            states,
            inputs,
            status: SolverStatus::NumericalFailure,
            kin_violation: f64::INFINITY,
            prob_violation: f64::INFINITY,
            solve_ms: t0.elapsed().as_secs_f64() * 1e3,
            sqp_iterations: 0,
        };
    }
    let merit = |xs: &[EgoState], us: &[ControlInput]| {
        let j = tracking_cost(xs, us, params, setup.r_y, setup.r_v);
        let (kin, prob) = violations(xs, us, params, setup);
        j + KIN_WEIGHT * kin.max(0.0) + PROB_WEIGHT * prob.max(0.0)
    };
    let nu = 2 * n;
    let mut qp_infeasible = false;
    let mut iters = 0;
    let mut trust = params.trust0;
    for _ in 0..params.sqp_iters {
        iters += 1;
        let gamma = sensitivities(&states, &inputs, params.dt);
        let asm = assemble(&states, &inputs, &gamma, params, setup, trust);
        let sol = solve_qp(&asm.qp, &params.qp, qp_warm.as_ref());
        match sol.status {
            QpStatus::PrimalInfeasible => {
                qp_infeasible = true;
                *qp_warm = None;
                break;
            }
            QpStatus::MaxIter | QpStatus::Solved => {}
        }
        let m0 = merit(&states, &inputs);
        let mut accepted_scale = None;
        for scale in [1.0, 0.5, 0.25] {
            // Actuator limits are hard; clamping also scrubs any box
            // violation an inexact program iterate might carry.
            let trial: Vec<ControlInput> = inputs
                .iter()
                .enumerate()
                .map(|(k, u)| ControlInput {
                    a_d: (u.a_d + scale * sol.x[2 * k]).clamp(-params.a_d_max, params.a_d_max),
                    gamma_d: (u.gamma_d + scale * sol.x[2 * k + 1])
                        .clamp(-params.gamma_d_max, params.gamma_d_max),
                })
                .collect();
            let trial_states = rollout(&setup.x0, &trial, params.dt);
            if !finite(&trial_states) {
                continue;
            }
            if merit(&trial_states, &trial) <= m0 + 1e-9 {
                accepted_scale = Some(scale);
                inputs = trial;
                states = trial_states;
                break;
            }
        }
        let step_norm = sol.x.rows(0, nu).amax();
        if std::env::var_os("OCP_TRACE").is_some() {
            let (kv, pv) = violations(&states, &inputs, params, setup);
            eprintln!(
                "sqp it={iters} qp={:?}/{} sigma={:.3e} step={step_norm:.3e} trust={trust:.3} kin={kv:.3e} prob={pv:.3e} merit={:.6e}",
                sol.status,
                sol.iterations,
                sol.x[nu],
                merit(&states, &inputs)
            );
        }
        *qp_warm = Some(sol);
        match accepted_scale {
            Some(scale) => {
                // A clean full step earns back trust; a converged step ends
                // the loop.
                if scale == 1.0 {
                    trust = (1.6 * trust).min(1.0);
                }
                if scale * step_norm < 1e-8 {
                    break;
                }
            }
            None => {
                // The quadratic model misled outside this radius; shrink
                // and relinearize from the same point.
                trust /= 3.0;
                if trust < 1e-3 {
                    break;
                }
            }
        }
    }
    let (kin, prob) = violations(&states, &inputs, params, setup);
    let status = if !finite(&states) {
        SolverStatus::NumericalFailure
    } else if qp_infeasible {
        SolverStatus::Infeasible
    } else if kin <= KIN_TOL && prob <= PROB_TOL {
        SolverStatus::Feasible
    } else {
        SolverStatus::IterationLimit
    };
    PlanResult {
        states,
        inputs,
        status,
        kin_violation: kin,
        prob_violation: prob,
        solve_ms: t0.elapsed().as_secs_f64() * 1e3,
        sqp_iterations: iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use collision_bounds::{
        build_corridor, Corridor, Cov2, DecoupleMethod, Gaussian2, HeadingStats, PlanPoint,
        RectShape, VehicleDist,
    };

    fn road() -> RoadBounds {
        RoadBounds { y_lo: -5.0, y_hi: 5.0, s_min: 0.0, s_max: 1000.0 }
    }

    fn free_corridor(plan_s: &[f64]) -> Corridor {
        let pts: Vec<PlanPoint> = plan_s.iter().map(|&s| PlanPoint { s, y_e: 0.0 }).collect();
        let boxes = vec![vec![]; pts.len()];
        build_corridor(&pts, &boxes, &road(), 30.0)
    }

    fn solve_free(x0: EgoState, r_y: f64, r_v: f64, params: &PlannerParams) -> PlanResult {
        let warm = vec![ControlInput::default(); params.horizon];
        let plan_s: Vec<f64> =
            (0..=params.horizon).map(|k| x0.s + x0.v * params.dt * k as f64).collect();
        let corr = free_corridor(&plan_s);
        let setup = OcpSetup {
            x0,
            warm_inputs: &warm,
            r_y,
            r_v,
            road: road(),
            path: PathConstraint::Corridor(&corr),
        };
        solve_ocp(&setup, params, &mut None)
    }

    #[test]
    fn cruise_at_reference_needs_no_input() {
        let params = PlannerParams::default();
        let x0 = EgoState { v: 20.0, ..Default::default() };
        let r = solve_free(x0, 0.0, 20.0, &params);
        assert_eq!(r.status, SolverStatus::Feasible);
        for u in &r.inputs {
            assert!(u.a_d.abs() < 1e-3 && u.gamma_d.abs() < 1e-3, "{u:?}");
        }
    }

    #[test]
    fn regulates_lateral_offset_to_reference() {
        let params = PlannerParams { sqp_iters: 5, ..Default::default() };
        let x0 = EgoState { y_e: 2.0, v: 15.0, ..Default::default() };
        let r = solve_free(x0, 0.0, 15.0, &params);
        assert_eq!(r.status, SolverStatus::Feasible);
        let last = r.states.last().unwrap();
        assert!(last.y_e.abs() < 0.2, "terminal offset {}", last.y_e);
    }

    #[test]
    fn speed_reference_above_limit_saturates_at_limit() {
        let params = PlannerParams { sqp_iters: 5, ..Default::default() };
        let x0 = EgoState { v: 28.0, ..Default::default() };
        let r = solve_free(x0, 0.0, 40.0, &params);
        assert_eq!(r.status, SolverStatus::Feasible);
        for x in &r.states {
            assert!(x.v <= 30.0 + 1e-3, "speed {}", x.v);
        }
        assert!(r.states.last().unwrap().v > 29.0);
    }

    #[test]
    fn corridor_line_is_respected() {
        // Corridor pinched to y <= 0.5 while the reference asks for 2.0.
        let params = PlannerParams { sqp_iters: 5, ..Default::default() };
        let x0 = EgoState { v: 15.0, ..Default::default() };
        let plan_s: Vec<f64> = (0..=params.horizon).map(|k| 15.0 * 0.15 * k as f64).collect();
        let mut corr = free_corridor(&plan_s);
        for st in &mut corr.steps {
            st.alpha_hi = 0.0;
            st.beta_hi = 0.5;
        }
        let warm = vec![ControlInput::default(); params.horizon];
        let setup = OcpSetup {
            x0,
            warm_inputs: &warm,
            r_y: 2.0,
            r_v: 15.0,
            road: road(),
            path: PathConstraint::Corridor(&corr),
        };
        let r = solve_ocp(&setup, &params, &mut None);
        assert_eq!(r.status, SolverStatus::Feasible);
        for x in &r.states[1..] {
            assert!(x.y_e <= 0.5 + 1e-3, "offset {}", x.y_e);
        }
        // The plan should still push toward the line rather than hide at 0.
        assert!(r.states.last().unwrap().y_e > 0.2);
    }

    #[test]
    fn collapsed_corridor_reports_infeasible() {
        let params = PlannerParams::default();
        let x0 = EgoState { v: 15.0, ..Default::default() };
        let plan_s: Vec<f64> = (0..=params.horizon).map(|k| 15.0 * 0.15 * k as f64).collect();
        let mut corr = free_corridor(&plan_s);
        for st in &mut corr.steps[5..] {
            st.beta_hi = -1.0;
            st.beta_lo = 1.0;
            st.feasible = false;
        }
        let warm = vec![ControlInput::default(); params.horizon];
        let setup = OcpSetup {
            x0,
            warm_inputs: &warm,
            r_y: 0.0,
            r_v: 15.0,
            road: road(),
            path: PathConstraint::Corridor(&corr),
        };
        let r = solve_ocp(&setup, &params, &mut None);
        assert_eq!(r.status, SolverStatus::Infeasible);
    }

    #[test]
    fn friction_cap_binds_during_swerve() {
        let params = PlannerParams { sqp_iters: 6, ..Default::default() };
        let x0 = EgoState { v: 28.0, y_e: -3.0, ..Default::default() };
        let r = solve_free(x0, 3.0, 28.0, &params);
        assert_eq!(r.status, SolverStatus::Feasible);
        for x in &r.states[1..] {
            assert!((x.v * x.gamma).abs() <= params.friction_max + 1e-3);
        }
    }

    #[test]
    fn direct_bound_constraint_steers_clear() {
        // A small initial offset keeps the linearized bound gradient
        // informative; dead center it vanishes by symmetry.
        let params = PlannerParams { sqp_iters: 8, ..Default::default() };
        let x0 = EgoState { v: 15.0, y_e: 0.4, ..Default::default() };
        let shape = RectShape::new(2.5, 1.0).unwrap();
        let ego_dist = VehicleDist {
            pos: Gaussian2 { mean: [0.0, 0.0], cov: Cov2::diagonal(0.1, 0.1).unwrap() },
            heading: HeadingStats { mean: 0.0, var: 0.01 },
            shape,
        };
        let ov_dist = VehicleDist {
            pos: Gaussian2 { mean: [0.0, 0.0], cov: Cov2::diagonal(0.1, 0.1).unwrap() },
            heading: HeadingStats { mean: 0.0, var: 0.01 },
            shape,
        };
        let ctx = BoundContext::build(&ego_dist, &ov_dist, DecoupleMethod::Pa, 20).unwrap();
        let delta = 1e-3;
        // Stationary vehicle dead ahead in the lane.
        let per_step: Vec<StepBound> = (0..=params.horizon)
            .map(|_| StepBound { ctx: ctx.clone(), ov_mean: [60.0, 0.0] })
            .collect();
        let per_ov = vec![per_step];
        let warm = vec![ControlInput::default(); params.horizon];
        let setup = OcpSetup {
            x0,
            warm_inputs: &warm,
            r_y: 0.0,
            r_v: 15.0,
            road: road(),
            path: PathConstraint::Bounds { per_ov: &per_ov, delta },
        };
        let r = solve_ocp(&setup, &params, &mut None);
        assert_eq!(r.status, SolverStatus::Feasible);
        for x in &r.states[1..] {
            let b = ctx.eval([x.s - 60.0, x.y_e]);
            assert!(b <= delta + 1e-9, "bound {b} at s={}", x.s);
        }
        // It must actually pass the obstacle laterally, not just stop.
        let max_y = r.states.iter().map(|x| x.y_e.abs()).fold(0.0f64, f64::max);
        assert!(max_y > 0.5, "no evasion: max |y| = {max_y}");
    }

    #[test]
    fn jacobians_match_forward_differences() {
        let x = EgoState { s: 3.0, y_e: 0.4, phi: 0.05, v: 12.0, a: 0.5, gamma: 0.02 };
        let u = ControlInput { a_d: 1.0, gamma_d: -0.1 };
        let (a, b) = fd_jacobians(&x, &u, 0.15);
        // Spot-check dominant entries against the model structure:
        // ds/dv ~ dt, dv/da ~ dt, and the lag decay on a.
        assert_abs_diff_eq!(a[(0, 3)], 0.15, epsilon = 1e-3);
        assert_abs_diff_eq!(a[(3, 4)], 0.15 * (1.0 - 0.5 * 0.15 / 0.3), epsilon = 2e-2);
        assert!(b[(4, 0)] > 0.0 && b[(5, 1)] > 0.0);
        // Sensitivity chain: one-step gamma equals B.
        let states = vec![x, rk4_step(&x, &u, 0.15)];
        let gamma = sensitivities(&states, &[u], 0.15);
        for i in 0..6 {
            for j in 0..2 {
                assert_abs_diff_eq!(gamma[1][(i, j)], b[(i, j)], epsilon = 1e-9);
            }
        }
    }
}
