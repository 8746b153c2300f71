//! Strictly-validated JSON configuration files for every subcommand.
//!
//! Schemas are closed: an unknown key is a parse error, and every field is
//! required unless a default is documented here. Units are SI throughout
//! and angles are radians. Range checks run after parsing and name the
//! offending field, so a bad file is always rejected with a diagnostic
//! before any computation starts.

use std::fmt;
use std::path::Path;

use collision_bounds::{
    BoundsError, Cov2, Gaussian2, GridSpec, HeadingStats, RectShape, RoadBounds, VehicleDist,
};
use corridor_planner::{
    EgoSpec, EgoState, IdmParams, LateralGains, OvBehavior, OvSpec, OvState, PlannerParams,
    Scenario, UncertaintySchedule,
};
use serde::{Deserialize, Serialize};

/// Driver-level failure carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, unparsable, or out-of-range configuration: exit code 2.
    Config(String),
    /// Failure while computing or writing results: exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses a JSON config file; syntax errors, unknown keys, and missing
/// fields are reported with the source line and column.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn require(ok: bool, field: &str, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: {msg}")))
    }
}

fn require_finite(value: f64, field: &str) -> Result<(), CliError> {
    require(value.is_finite(), field, "must be finite")
}

/// Rectangle half-dimensions: half the vehicle length and width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub half_length: f64,
    pub half_width: f64,
}

impl ShapeSpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        require_finite(self.half_length, field)?;
        require_finite(self.half_width, field)?;
        require(
            self.half_length > 0.0 && self.half_width > 0.0,
            field,
            "half dimensions must be positive",
        )
    }

    fn to_shape(&self, field: &str) -> Result<RectShape, CliError> {
        RectShape::new(self.half_length, self.half_width)
            .map_err(|e| CliError::Config(format!("{field}: {e}")))
    }
}

/// Position and heading variances. `pos_xy` is the position covariance
/// cross term and defaults to zero (independent axes).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarSpec {
    pub pos_x: f64,
    pub pos_y: f64,
    #[serde(default)]
    pub pos_xy: f64,
    pub heading: f64,
}

impl VarSpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        for v in [self.pos_x, self.pos_y, self.pos_xy, self.heading] {
            require_finite(v, field)?;
        }
        require(self.pos_x > 0.0 && self.pos_y > 0.0, field, "position variances must be positive")?;
        require(
            self.pos_xy * self.pos_xy < self.pos_x * self.pos_y,
            field,
            "pos_xy must satisfy pos_xy^2 < pos_x * pos_y",
        )?;
        require(self.heading > 0.0, field, "heading variance must be positive")
    }

    fn to_cov(&self, field: &str) -> Result<Cov2, CliError> {
        Cov2::new(self.pos_x, self.pos_xy, self.pos_y)
            .map_err(|e| CliError::Config(format!("{field}: {e}")))
    }
}

/// One uncertain rectangle for the grid and box commands: shape, belief
/// variances, and mean heading. Positions come from the command config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub shape: ShapeSpec,
    pub perturb_var: VarSpec,
    pub heading_mean: f64,
}

impl BodySpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        self.shape.validate(&format!("{field}.shape"))?;
        self.perturb_var.validate(&format!("{field}.perturb_var"))?;
        require_finite(self.heading_mean, &format!("{field}.heading_mean"))
    }

    pub fn to_dist(&self, mean: [f64; 2], field: &str) -> Result<VehicleDist, CliError> {
        Ok(VehicleDist {
            pos: Gaussian2 { mean, cov: self.perturb_var.to_cov(&format!("{field}.perturb_var"))? },
            heading: HeadingStats { mean: self.heading_mean, var: self.perturb_var.heading },
            shape: self.shape.to_shape(&format!("{field}.shape"))?,
        })
    }

    /// Same distribution with the position covariance and heading variance
    /// multiplied by the given factors.
    pub fn to_dist_scaled(
        &self,
        mean: [f64; 2],
        pos_scale: f64,
        heading_scale: f64,
        field: &str,
    ) -> Result<VehicleDist, CliError> {
        let mut d = self.to_dist(mean, field)?;
        let c = d.pos.cov;
        d.pos.cov = Cov2::new(c.sxx * pos_scale, c.sxy * pos_scale, c.syy * pos_scale)
            .map_err(|e| CliError::Config(format!("{field}.perturb_var: {e}")))?;
        d.heading.var *= heading_scale;
        Ok(d)
    }
}

/// Straight road segment: path positions run from 0 to `length_m`, lateral
/// offsets from `y_min` to `y_max`. `width_m` must equal `y_max - y_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadSpec {
    pub length_m: f64,
    pub width_m: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RoadSpec {
    fn validate(&self) -> Result<(), CliError> {
        for v in [self.length_m, self.width_m, self.y_min, self.y_max] {
            require_finite(v, "road")?;
        }
        require(self.length_m > 0.0, "road.length_m", "must be positive")?;
        require(self.y_max > self.y_min, "road.y_max", "must exceed road.y_min")?;
        require(
            (self.width_m - (self.y_max - self.y_min)).abs() <= 1e-9,
            "road.width_m",
            "must equal y_max - y_min",
        )
    }

    fn to_bounds(&self) -> RoadBounds {
        RoadBounds { y_lo: self.y_min, y_hi: self.y_max, s_min: 0.0, s_max: self.length_m }
    }
}

/// Initial mean pose and speed of a vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitState {
    pub s: f64,
    pub y_e: f64,
    pub phi: f64,
    pub v: f64,
}

impl InitState {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        for v in [self.s, self.y_e, self.phi, self.v] {
            require_finite(v, field)?;
        }
        require(self.v >= 0.0, &format!("{field}.v"), "must be nonnegative")
    }
}

/// Lateral-offset and speed references tracked by the planner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefSpec {
    pub y_e: f64,
    pub v: f64,
}

/// Ego vehicle: initial means, belief variances (used both to draw the
/// run's initial perturbation and in every bound evaluation), references,
/// and footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoConfig {
    pub init: InitState,
    pub shape: ShapeSpec,
    pub perturb_var: VarSpec,
    pub refs: RefSpec,
}

/// Base uncertainty of an object vehicle plus optional linear growth per
/// second of prediction time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    pub pos_x: f64,
    pub pos_y: f64,
    #[serde(default)]
    pub pos_xy: f64,
    pub heading: f64,
    #[serde(default)]
    pub pos_growth: f64,
    #[serde(default)]
    pub heading_growth: f64,
}

impl UncertaintySpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        let var = VarSpec {
            pos_x: self.pos_x,
            pos_y: self.pos_y,
            pos_xy: self.pos_xy,
            heading: self.heading,
        };
        var.validate(field)?;
        require_finite(self.pos_growth, field)?;
        require_finite(self.heading_growth, field)?;
        require(
            self.pos_growth >= 0.0 && self.heading_growth >= 0.0,
            field,
            "growth rates must be nonnegative",
        )
    }

    fn to_schedule(&self, field: &str) -> Result<UncertaintySchedule, CliError> {
        Ok(UncertaintySchedule {
            pos: Cov2::new(self.pos_x, self.pos_xy, self.pos_y)
                .map_err(|e| CliError::Config(format!("{field}: {e}")))?,
            heading_var: self.heading,
            pos_growth: self.pos_growth,
            heading_growth: self.heading_growth,
        })
    }
}

/// Free-road longitudinal controller parameters (all positive).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmSpec {
    pub accel_max: f64,
    pub decel_max: f64,
    pub exponent: f64,
}

impl Default for IdmSpec {
    fn default() -> Self {
        let d = IdmParams::default();
        IdmSpec { accel_max: d.accel_max, decel_max: d.decel_max, exponent: d.exponent }
    }
}

impl IdmSpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        for v in [self.accel_max, self.decel_max, self.exponent] {
            require_finite(v, field)?;
        }
        require(
            self.accel_max > 0.0 && self.decel_max > 0.0 && self.exponent > 0.0,
            field,
            "all parameters must be positive",
        )
    }

    fn to_params(&self) -> IdmParams {
        IdmParams { accel_max: self.accel_max, decel_max: self.decel_max, exponent: self.exponent }
    }
}

/// Proportional lane-keeping gains and heading clamp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LateralSpec {
    pub kp_y: f64,
    pub kp_phi: f64,
    pub phi_max: f64,
}

impl Default for LateralSpec {
    fn default() -> Self {
        let d = LateralGains::default();
        LateralSpec { kp_y: d.kp_y, kp_phi: d.kp_phi, phi_max: d.phi_max }
    }
}

impl LateralSpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        for v in [self.kp_y, self.kp_phi, self.phi_max] {
            require_finite(v, field)?;
        }
        require(
            self.kp_y >= 0.0 && self.kp_phi >= 0.0 && self.phi_max > 0.0,
            field,
            "gains must be nonnegative and phi_max positive",
        )
    }

    fn to_gains(&self) -> LateralGains {
        LateralGains { kp_y: self.kp_y, kp_phi: self.kp_phi, phi_max: self.phi_max }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorKind {
    Stationary,
    Lane,
}

/// Object-vehicle behavior. `stationary` takes no parameters; `lane`
/// requires `v_ref` and `y_ref` and accepts optional `idm` and `lateral`
/// controller overrides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorSpec {
    #[serde(rename = "type")]
    pub kind: BehaviorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idm: Option<IdmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral: Option<LateralSpec>,
}

impl BehaviorSpec {
    fn validate(&self, field: &str, road: &RoadSpec) -> Result<(), CliError> {
        match self.kind {
            BehaviorKind::Stationary => {
                require(
                    self.v_ref.is_none()
                        && self.y_ref.is_none()
                        && self.idm.is_none()
                        && self.lateral.is_none(),
                    field,
                    "stationary behavior takes no parameters",
                )
            }
            BehaviorKind::Lane => {
                let v_ref = self.v_ref.ok_or_else(|| {
                    CliError::Config(format!("{field}.v_ref: required for type \"lane\""))
                })?;
                let y_ref = self.y_ref.ok_or_else(|| {
                    CliError::Config(format!("{field}.y_ref: required for type \"lane\""))
                })?;
                require_finite(v_ref, &format!("{field}.v_ref"))?;
                require(v_ref >= 0.0, &format!("{field}.v_ref"), "must be nonnegative")?;
                require_finite(y_ref, &format!("{field}.y_ref"))?;
                require(
                    y_ref >= road.y_min && y_ref <= road.y_max,
                    &format!("{field}.y_ref"),
                    "must lie within the road",
                )?;
                if let Some(idm) = &self.idm {
                    idm.validate(&format!("{field}.idm"))?;
                }
                if let Some(lat) = &self.lateral {
                    lat.validate(&format!("{field}.lateral"))?;
                }
                Ok(())
            }
        }
    }

    fn to_behavior(&self) -> OvBehavior {
        match self.kind {
            BehaviorKind::Stationary => OvBehavior::Stationary,
            BehaviorKind::Lane => OvBehavior::Lane {
                v_ref: self.v_ref.expect("validated"),
                y_ref: self.y_ref.expect("validated"),
                idm: self.idm.unwrap_or_default().to_params(),
                lateral: self.lateral.unwrap_or_default().to_gains(),
            },
        }
    }
}

/// One object vehicle: initial means, footprint, behavior, and the
/// uncertainty attached to its predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OvConfig {
    pub init: InitState,
    pub shape: ShapeSpec,
    pub behavior: BehaviorSpec,
    pub uncertainty: UncertaintySpec,
}

/// Seed of the first run and how many runs a batch contains; run `i` uses
/// seed `base + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub base: u64,
    pub n_runs: usize,
}

/// Complete closed-loop scenario: road, vehicles, probability threshold,
/// bound resolution, planner discretization, and the seeded batch size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub road: RoadSpec,
    pub ego: EgoConfig,
    pub ovs: Vec<OvConfig>,
    /// Per-step, per-vehicle collision probability threshold.
    pub delta: f64,
    /// Heading-interval count for every bound evaluation.
    pub n_phi: usize,
    /// Planner step length in seconds.
    pub dt: f64,
    /// Planner horizon length in steps.
    pub horizon: usize,
    /// Half-length of each corridor step's path-position range.
    pub delta_s: f64,
    /// Closed-loop ticks to simulate per run.
    pub n_steps: usize,
    pub seeds: SeedSpec,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        self.road.validate()?;
        self.ego.init.validate("ego.init")?;
        self.ego.shape.validate("ego.shape")?;
        self.ego.perturb_var.validate("ego.perturb_var")?;
        require_finite(self.ego.refs.y_e, "ego.refs.y_e")?;
        require_finite(self.ego.refs.v, "ego.refs.v")?;
        require(
            self.ego.refs.y_e >= self.road.y_min && self.ego.refs.y_e <= self.road.y_max,
            "ego.refs.y_e",
            "must lie within the road",
        )?;
        require(self.ego.refs.v >= 0.0, "ego.refs.v", "must be nonnegative")?;
        require(
            self.ego.init.y_e >= self.road.y_min && self.ego.init.y_e <= self.road.y_max,
            "ego.init.y_e",
            "must lie within the road",
        )?;
        for (i, ov) in self.ovs.iter().enumerate() {
            let field = format!("ovs[{i}]");
            ov.init.validate(&format!("{field}.init"))?;
            ov.shape.validate(&format!("{field}.shape"))?;
            ov.uncertainty.validate(&format!("{field}.uncertainty"))?;
            ov.behavior.validate(&format!("{field}.behavior"), &self.road)?;
            if ov.behavior.kind == BehaviorKind::Stationary {
                require(ov.init.v == 0.0, &format!("{field}.init.v"), "must be 0 when stationary")?;
            }
        }
        require(
            self.delta > 0.0 && self.delta < 1.0,
            "delta",
            "must lie strictly between 0 and 1",
        )?;
        require(self.n_phi >= 1, "n_phi", "must be at least 1")?;
        require(self.dt.is_finite() && self.dt > 0.0, "dt", "must be positive")?;
        require(self.horizon >= 1, "horizon", "must be at least 1")?;
        require(self.delta_s.is_finite() && self.delta_s > 0.0, "delta_s", "must be positive")?;
        require(self.n_steps >= 1, "n_steps", "must be at least 1")?;
        require(self.seeds.n_runs >= 1, "seeds.n_runs", "must be at least 1")
    }

    /// Builds the runnable scenario and the planner parameters it pins
    /// (step length, horizon, corridor range); remaining planner knobs keep
    /// their tuned defaults.
    pub fn to_scenario(&self) -> Result<(Scenario, PlannerParams), CliError> {
        self.validate()?;
        let ego = EgoSpec {
            init: EgoState {
                s: self.ego.init.s,
                y_e: self.ego.init.y_e,
                phi: self.ego.init.phi,
                v: self.ego.init.v,
                a: 0.0,
                gamma: 0.0,
            },
            shape: self.ego.shape.to_shape("ego.shape")?,
            pos_cov: self.ego.perturb_var.to_cov("ego.perturb_var")?,
            heading_var: self.ego.perturb_var.heading,
            r_y: self.ego.refs.y_e,
            r_v: self.ego.refs.v,
        };
        let ovs = self
            .ovs
            .iter()
            .enumerate()
            .map(|(i, ov)| {
                let field = format!("ovs[{i}]");
                Ok(OvSpec {
                    init: OvState {
                        s: ov.init.s,
                        y: ov.init.y_e,
                        phi: ov.init.phi,
                        v: ov.init.v,
                    },
                    behavior: ov.behavior.to_behavior(),
                    shape: ov.shape.to_shape(&format!("{field}.shape"))?,
                    uncertainty: ov.uncertainty.to_schedule(&format!("{field}.uncertainty"))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let scenario = Scenario {
            road: self.road.to_bounds(),
            ego,
            ovs,
            delta: self.delta,
            n_phi: self.n_phi,
            n_steps: self.n_steps,
        };
        let params = PlannerParams {
            dt: self.dt,
            horizon: self.horizon,
            delta_s: self.delta_s,
            ..PlannerParams::default()
        };
        Ok((scenario, params))
    }
}

/// Relative-mean grid: `nx` by `ny` nodes spanning the closed ranges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridConfig {
    fn validate(&self) -> Result<(), CliError> {
        for v in [self.x_min, self.x_max, self.y_min, self.y_max] {
            require_finite(v, "grid")?;
        }
        self.to_grid().validate().map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn to_grid(&self) -> GridSpec {
        GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            nx: self.nx,
            y_min: self.y_min,
            y_max: self.y_max,
            ny: self.ny,
        }
    }
}

/// Probability-grid sweep: analytic bounds and a Monte-Carlo estimate as a
/// function of the relative mean between two uncertain rectangles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContoursConfig {
    pub ego: BodySpec,
    pub ov: BodySpec,
    pub grid: GridConfig,
    pub n_phi: usize,
    /// Monte-Carlo draws per grid node.
    pub mc_samples: usize,
    /// Base seed for the per-node Monte-Carlo streams; `--seed` overrides.
    pub mc_seed: u64,
}

impl ContoursConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.ego.validate("ego")?;
        self.ov.validate("ov")?;
        self.grid.validate()?;
        require(self.n_phi >= 1, "n_phi", "must be at least 1")?;
        require(self.mc_samples >= 1, "mc_samples", "must be at least 1")
    }
}

/// Inclusive linear sweep with `n` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl SweepSpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        require_finite(self.min, field)?;
        require_finite(self.max, field)?;
        require(self.n >= 1, field, "must have at least one point")?;
        require(self.max >= self.min, field, "max must be at least min")
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

/// Transformed-box sweep: how the circumscribed box of a fixed `a` by `b`
/// rectangle grows under each decoupling, across correlation and
/// standard-deviation-ratio values. `sigma_y` sets the absolute scale
/// against which the ratio is applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConservatismConfig {
    pub a: f64,
    pub b: f64,
    pub sigma_y: f64,
    pub rho: SweepSpec,
    pub sigma_ratio: SweepSpec,
}

impl ConservatismConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        require_finite(self.a, "a")?;
        require_finite(self.b, "b")?;
        require(self.a > 0.0 && self.b > 0.0, "a", "box half dimensions must be positive")?;
        require(self.sigma_y.is_finite() && self.sigma_y > 0.0, "sigma_y", "must be positive")?;
        self.rho.validate("rho")?;
        require(
            self.rho.min > -1.0 && self.rho.max < 1.0,
            "rho",
            "must lie strictly inside (-1, 1)",
        )?;
        self.sigma_ratio.validate("sigma_ratio")?;
        require(self.sigma_ratio.min > 0.0, "sigma_ratio.min", "must be positive")
    }
}

/// Position of the object vehicle's mean relative to the ego mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSpec {
    pub x: f64,
    pub y: f64,
}

/// One schedule entry: multiply both vehicles' position covariances and
/// heading variances by these factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSpec {
    pub pos_scale: f64,
    pub heading_scale: f64,
}

/// Threshold-tightened box sweep across an uncertainty schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BboxConfig {
    pub ego: BodySpec,
    pub ov: BodySpec,
    pub ov_offset: OffsetSpec,
    pub delta: f64,
    pub n_phi: usize,
    pub schedule: Vec<ScaleSpec>,
}

impl BboxConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.ego.validate("ego")?;
        self.ov.validate("ov")?;
        require_finite(self.ov_offset.x, "ov_offset.x")?;
        require_finite(self.ov_offset.y, "ov_offset.y")?;
        require(
            self.delta > 0.0 && self.delta < 1.0,
            "delta",
            "must lie strictly between 0 and 1",
        )?;
        require(self.n_phi >= 1, "n_phi", "must be at least 1")?;
        require(!self.schedule.is_empty(), "schedule", "must have at least one entry")?;
        for (i, sc) in self.schedule.iter().enumerate() {
            let field = format!("schedule[{i}]");
            require_finite(sc.pos_scale, &field)?;
            require_finite(sc.heading_scale, &field)?;
            require(
                sc.pos_scale > 0.0 && sc.heading_scale > 0.0,
                &field,
                "scales must be positive",
            )?;
        }
        Ok(())
    }
}
