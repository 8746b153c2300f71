use collision_bounds::{
    build_corridor, tightened_bbox, BoundsError, Cov2, DecoupleMethod, PlanPoint, PtsParams,
    RectShape, RoadBounds, TightenedBox,
};
use corridor_planner::ocp::PathConstraint;
use corridor_planner::sim::{sample_initial, EgoSpec, Scenario};
use corridor_planner::{
    ov_predict, ov_step, rollout, solve_ocp, ControlInput, EgoState, OcpSetup, OvBehavior, OvSpec,
    OvState, PlannerParams, UncertaintySchedule,
};

fn main() {
    let shape = RectShape::new(2.5, 1.0).unwrap();
    let cov = Cov2::diagonal(0.1, 0.1).unwrap();
    let sc = Scenario {
        road: RoadBounds { y_lo: -5.0, y_hi: 5.0, s_min: 0.0, s_max: 280.0 },
        ego: EgoSpec {
            init: EgoState { s: 0.0, y_e: 0.5, phi: 0.0, v: 17.0, a: 0.0, gamma: 0.0 },
            shape,
            pos_cov: cov,
            heading_var: 0.01,
            r_y: 0.0,
            r_v: 20.0,
        },
        ovs: vec![
            OvSpec {
                init: OvState { s: 150.0, y: -2.0, phi: 0.0, v: 0.0 },
                behavior: OvBehavior::Stationary,
                shape,
                uncertainty: UncertaintySchedule::constant(cov, 0.01),
            },
            OvSpec {
                init: OvState { s: 200.0, y: 2.0, phi: std::f64::consts::PI / 16.0, v: 0.0 },
                behavior: OvBehavior::Stationary,
                shape,
                uncertainty: UncertaintySchedule::constant(cov, 0.01),
            },
        ],
        delta: 0.001,
        n_phi: 20,
        n_steps: 100,
    };
    let params = PlannerParams { delta_s: 15.0, ..PlannerParams::default() };
    let n = params.horizon;
    let dt = params.dt;
    let (mut ego, mut ovs) = sample_initial(&sc, 1000);
    let mut prev_inputs = vec![ControlInput::default(); n];
    let mut prev_states = rollout(&ego, &prev_inputs, dt);
    let mut qp_warm = None;
    for k in 0..sc.n_steps {
        let preds: Vec<Vec<_>> = sc
            .ovs
            .iter()
            .zip(&ovs)
            .map(|(spec, st)| ov_predict(spec, st, n, dt))
            .collect();
        let prev_arrays: Vec<[f64; 6]> = prev_states.iter().map(|x| x.to_array()).collect();
        let shifted: Vec<EgoState> = collision_bounds::shift_plan(&prev_arrays, dt, dt)
            .into_iter()
            .map(EgoState::from_array)
            .collect();
        let mut warm_inputs: Vec<ControlInput> = prev_inputs[1..].to_vec();
        warm_inputs.push(*prev_inputs.last().unwrap());

        let pts = PtsParams::new(sc.delta);
        let mut boxes_per_step: Vec<Vec<TightenedBox>> = Vec::with_capacity(n + 1);
        for (j, ps) in shifted.iter().enumerate() {
            let ego_j = collision_bounds::VehicleDist {
                pos: collision_bounds::Gaussian2 { mean: [ps.s, ps.y_e], cov },
                heading: collision_bounds::HeadingStats { mean: ps.phi, var: 0.01 },
                shape,
            };
            let mut boxes = Vec::new();
            for pred in &preds {
                match tightened_bbox(&ego_j, &pred[j], sc.n_phi, DecoupleMethod::Us2, DecoupleMethod::Us1, &pts) {
                    Ok(bx) => boxes.push(bx),
                    Err(BoundsError::ThresholdUnreachable { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
            boxes_per_step.push(boxes);
        }
        let plan_pts: Vec<PlanPoint> =
            shifted.iter().map(|x| PlanPoint { s: x.s, y_e: x.y_e }).collect();
        let corridor = build_corridor(&plan_pts, &boxes_per_step, &sc.road, params.delta_s);

        let collapsed = !corridor.all_feasible();
        let result = if collapsed {
            None
        } else {
            let setup = OcpSetup {
                x0: ego,
                warm_inputs: &warm_inputs,
                r_y: sc.ego.r_y,
                r_v: sc.ego.r_v,
                road: sc.road,
                path: PathConstraint::Corridor(&corridor),
            };
            Some(solve_ocp(&setup, &params, &mut qp_warm))
        };
        let status = result.as_ref().map(|r| format!("{:?}", r.status)).unwrap_or("Collapsed".into());
        let (kin, prob) = result
            .as_ref()
            .map(|r| (r.kin_violation, r.prob_violation))
            .unwrap_or((-1.0, -1.0));
        println!(
            "k={k:3} t={:5.2} s={:7.2} y={:6.2} phi={:6.3} v={:6.2} {status} kin={kin:.3e} prob={prob:.3e}",
            (k + 1) as f64 * dt, ego.s, ego.y_e, ego.phi, ego.v
        );
        if (16..=30).contains(&k) {
            for (j, st) in corridor.steps.iter().enumerate() {
                let constrained = st.alpha_hi != 0.0
                    || st.alpha_lo != 0.0
                    || st.beta_hi != sc.road.y_hi
                    || st.beta_lo != sc.road.y_lo;
                if j % 8 == 0 || !st.feasible || constrained {
                    let p = plan_pts[j];
                    println!(
                        "    j={j:2} p.s={:7.2} p.y={:6.2} rng=[{:7.2},{:7.2}] lo@p={:6.2} hi@p={:6.2} feas={} (alo={:.3} blo={:.1} ahi={:.3} bhi={:.1})",
                        p.s, p.y_e, st.s_lo, st.s_hi,
                        st.lower_at(p.s), st.upper_at(p.s), st.feasible,
                        st.alpha_lo, st.beta_lo, st.alpha_hi, st.beta_hi
                    );
                }
            }
        }
        let usable = result
            .as_ref()
            .map(|r| match r.status {
                corridor_planner::SolverStatus::Feasible => true,
                corridor_planner::SolverStatus::IterationLimit => {
                    r.kin_violation <= 0.05 && r.prob_violation <= 0.1 * sc.delta
                }
                _ => false,
            })
            .unwrap_or(false);
        let input;
        if usable {
            let r = result.unwrap();
            input = r.inputs[0];
            prev_states = r.states;
            prev_inputs = r.inputs;
        } else {
            let mut fb_inputs = Vec::with_capacity(n);
            let mut x = ego;
            for _ in 0..n {
                let u = ControlInput {
                    a_d: (-2.0 * (x.v + corridor_planner::TAU_ACCEL * x.a))
                        .clamp(-params.a_d_max, params.a_d_max),
                    gamma_d: (-2.0 * (x.phi + corridor_planner::TAU_YAW * x.gamma))
                        .clamp(-params.gamma_d_max, params.gamma_d_max),
                };
                fb_inputs.push(u);
                x = corridor_planner::rk4_step(&x, &u, dt);
            }
            prev_states = rollout(&ego, &fb_inputs, dt);
            input = fb_inputs[0];
            prev_inputs = fb_inputs;
            qp_warm = None;
        }
        ego = corridor_planner::rk4_step(&ego, &input, dt);
        ovs = sc
            .ovs
            .iter()
            .zip(&ovs)
            .map(|(spec, st)| ov_step(st, &spec.behavior, dt))
            .collect();
    }
}
