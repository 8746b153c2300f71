//! Other-vehicle behavior models and uncertainty-annotated predictions.
//!
//! Vehicles either hold a fixed pose or follow a lane: free-road
//! intelligent-driver longitudinal control toward a speed reference plus
//! proportional lateral feedback toward a lane reference. Predictions
//! attach a position/heading uncertainty schedule to the rolled-out means.

use collision_bounds::{Cov2, Gaussian2, HeadingStats, RectShape, VehicleDist};

/// Other-vehicle state: path position, lateral offset, heading, speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OvState {
    pub s: f64,
    pub y: f64,
    pub phi: f64,
    pub v: f64,
}

/// Free-road longitudinal model parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdmParams {
    pub accel_max: f64,
    pub decel_max: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams { accel_max: 1.5, decel_max: 4.0, exponent: 4.0 }
    }
}

/// Proportional lane-keeping gains: lateral error to desired heading,
/// heading error to yaw rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LateralGains {
    pub kp_y: f64,
    pub kp_phi: f64,
    pub phi_max: f64,
}

impl Default for LateralGains {
    fn default() -> Self {
        LateralGains { kp_y: 0.2, kp_phi: 2.0, phi_max: 0.3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OvBehavior {
    Stationary,
    Lane {
        v_ref: f64,
        y_ref: f64,
        idm: IdmParams,
        lateral: LateralGains,
    },
}

fn lane_deriv(x: &OvState, v_ref: f64, y_ref: f64, idm: &IdmParams, lat: &LateralGains) -> [f64; 4] {
    let (sn, cs) = x.phi.sin_cos();
    let ratio = if v_ref > 0.0 { x.v / v_ref } else { f64::INFINITY };
    let dv = (idm.accel_max * (1.0 - ratio.powf(idm.exponent)))
        .clamp(-idm.decel_max, idm.accel_max);
    let phi_des = (lat.kp_y * (y_ref - x.y)).clamp(-lat.phi_max, lat.phi_max);
    let dphi = lat.kp_phi * (phi_des - x.phi);
    [x.v * cs, x.v * sn, dphi, dv]
}

/// One fixed-step fourth-order Runge-Kutta step of the behavior model.
pub fn ov_step(state: &OvState, behavior: &OvBehavior, dt: f64) -> OvState {
    match behavior {
        OvBehavior::Stationary => *state,
        OvBehavior::Lane { v_ref, y_ref, idm, lateral } => {
            let f = |x: &OvState| lane_deriv(x, *v_ref, *y_ref, idm, lateral);
            let add = |x: &OvState, k: &[f64; 4], h: f64| OvState {
                s: x.s + h * k[0],
                y: x.y + h * k[1],
                phi: x.phi + h * k[2],
                v: x.v + h * k[3],
            };
            let k1 = f(state);
            let k2 = f(&add(state, &k1, 0.5 * dt));
            let k3 = f(&add(state, &k2, 0.5 * dt));
            let k4 = f(&add(state, &k3, dt));
            OvState {
                s: state.s + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y: state.y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                phi: state.phi + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
                v: state.v + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
            }
        }
    }
}

/// Position/heading uncertainty as a function of prediction time: base
/// covariance plus nonnegative isotropic growth per second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintySchedule {
    pub pos: Cov2,
    pub heading_var: f64,
    pub pos_growth: f64,
    pub heading_growth: f64,
}

impl UncertaintySchedule {
    pub fn constant(pos: Cov2, heading_var: f64) -> Self {
        UncertaintySchedule { pos, heading_var, pos_growth: 0.0, heading_growth: 0.0 }
    }

    pub fn at(&self, t: f64) -> (Cov2, f64) {
        let g = self.pos_growth * t;
        let cov = Cov2::new(self.pos.sxx + g, self.pos.sxy, self.pos.syy + g)
            .expect("growth keeps the covariance positive definite");
        (cov, self.heading_var + self.heading_growth * t)
    }
}

/// Everything the simulator needs to run and reason about one vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OvSpec {
    pub init: OvState,
    pub behavior: OvBehavior,
    pub shape: RectShape,
    pub uncertainty: UncertaintySchedule,
}

/// Rolls the behavior out from `state` and attaches the uncertainty
/// schedule: `n + 1` distributions including the current step.
pub fn ov_predict(spec: &OvSpec, state: &OvState, n: usize, dt: f64) -> Vec<VehicleDist> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = *state;
    for k in 0..=n {
        let (cov, hvar) = spec.uncertainty.at(k as f64 * dt);
        out.push(VehicleDist {
            pos: Gaussian2 { mean: [x.s, x.y], cov },
            heading: HeadingStats { mean: x.phi, var: hvar },
            shape: spec.shape,
        });
        if k < n {
            x = ov_step(&x, &spec.behavior, dt);
        }
    }
    out
}
