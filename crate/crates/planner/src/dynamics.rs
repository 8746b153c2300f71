//! Ego vehicle model: kinematic bicycle in road-aligned coordinates with
//! first-order actuator lags on acceleration and yaw rate.

/// Actuator lag time constants, seconds.
pub const TAU_ACCEL: f64 = 0.3;
pub const TAU_YAW: f64 = 0.2;

/// Ego state: path position `s` (m), lateral offset `y_e` (m), heading
/// `phi` (rad, relative to the road), speed `v` (m/s), realized
/// acceleration `a` (m/s^2), realized yaw rate `gamma` (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EgoState {
    pub s: f64,
    pub y_e: f64,
    pub phi: f64,
    pub v: f64,
    pub a: f64,
    pub gamma: f64,
}

impl EgoState {
    pub fn to_array(self) -> [f64; 6] {
        [self.s, self.y_e, self.phi, self.v, self.a, self.gamma]
    }

    pub fn from_array(x: [f64; 6]) -> EgoState {
        EgoState { s: x[0], y_e: x[1], phi: x[2], v: x[3], a: x[4], gamma: x[5] }
    }
}

/// Commanded acceleration and yaw rate; the realized values lag behind.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ControlInput {
    pub a_d: f64,
    pub gamma_d: f64,
}

fn deriv(x: &[f64; 6], u: &ControlInput) -> [f64; 6] {
    let (sn, cs) = x[2].sin_cos();
    [
        x[3] * cs,
        x[3] * sn,
        x[5],
        x[4],
        (u.a_d - x[4]) / TAU_ACCEL,
        (u.gamma_d - x[5]) / TAU_YAW,
    ]
}

/// One fixed-step fourth-order Runge-Kutta step of the ego model.
pub fn rk4_step(state: &EgoState, input: &ControlInput, dt: f64) -> EgoState {
    let x = state.to_array();
    let k1 = deriv(&x, input);
    let mid1 = std::array::from_fn(|i| x[i] + 0.5 * dt * k1[i]);
    let k2 = deriv(&mid1, input);
    let mid2 = std::array::from_fn(|i| x[i] + 0.5 * dt * k2[i]);
    let k3 = deriv(&mid2, input);
    let end = std::array::from_fn(|i| x[i] + dt * k3[i]);
    let k4 = deriv(&end, input);
    EgoState::from_array(std::array::from_fn(|i| {
        x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Rolls a control sequence out from `x0`; returns `inputs.len() + 1`
/// states including the initial one.
pub fn rollout(x0: &EgoState, inputs: &[ControlInput], dt: f64) -> Vec<EgoState> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*x0);
    let mut x = *x0;
    for u in inputs {
        x = rk4_step(&x, u, dt);
        states.push(x);
    }
    states
}
