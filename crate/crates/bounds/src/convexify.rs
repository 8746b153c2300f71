//! Converts a probability threshold into geometry a convex planner can use.
//!
//! A one-dimensional Newton/bisection search inverts the per-axis profile of
//! the collision bound to find the offset where it crosses the threshold;
//! two such offsets tighten into a box around the other vehicle whose
//! exterior certifiably satisfies the bound; per-step boxes then collapse
//! into upper/lower linear corridor constraints on lateral position.

use crate::collision::{interval_prob_dmu, BoundContext, DecoupleMethod, VehicleDist};
use crate::normal::normal_interval_prob;
use crate::BoundsError;

/// Which decoupled axis a threshold search runs along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchAxis {
    One,
    Two,
}

/// Threshold-search configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtsParams {
    pub delta: f64,
    /// Convergence tolerance on `|bound - delta|`.
    pub eps: f64,
    pub max_iter: u32,
    /// Upper limit of the search bracket.
    pub mu_max: f64,
    /// Optional initial iterate; defaults to the diagonal of the largest
    /// per-interval transformed box.
    pub mu0: Option<f64>,
}

impl PtsParams {
    pub fn new(delta: f64) -> Self {
        PtsParams { delta, eps: 1e-9, max_iter: 60, mu_max: 1e5, mu0: None }
    }
}

/// Outcome of one per-axis threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtsResult {
    /// Offset along the searched axis where the bound meets the threshold.
    pub mu_star: f64,
    /// Bound value achieved at `mu_star`.
    pub bound: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// One-axis restriction of the bound with the other axis fixed at zero:
/// a weighted sum of centered Gaussian interval masses.
struct AxisProfile {
    /// Per interval: (weight times fixed-axis factor, searched-axis box dim).
    terms: Vec<(f64, f64)>,
    sigma: f64,
}

impl AxisProfile {
    fn new(ctx: &BoundContext, axis: SearchAxis) -> AxisProfile {
        let (s1, s2) = (ctx.decoupled.sigma1, ctx.decoupled.sigma2);
        let terms = ctx
            .intervals
            .iter()
            .map(|ib| match axis {
                SearchAxis::One => (
                    ib.weight * normal_interval_prob(0.0, s2, -ib.dims.b_pp, ib.dims.b_pp),
                    ib.dims.a_pp,
                ),
                SearchAxis::Two => (
                    ib.weight * normal_interval_prob(0.0, s1, -ib.dims.a_pp, ib.dims.a_pp),
                    ib.dims.b_pp,
                ),
            })
            .collect();
        let sigma = match axis {
            SearchAxis::One => s1,
            SearchAxis::Two => s2,
        };
        AxisProfile { terms, sigma }
    }

    fn value(&self, mu: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, dim)| c * normal_interval_prob(mu, self.sigma, -dim, dim))
            .sum()
    }

    fn deriv(&self, mu: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, dim)| c * interval_prob_dmu(dim, mu, self.sigma))
            .sum()
    }
}

/// Finds the axis offset where the bound profile crosses `delta`.
///
/// Newton steps are taken while they stay strictly inside the current
/// bracket and the derivative is usable; otherwise the bracket is bisected.
/// The profile is strictly decreasing for nonnegative offsets, so the
/// bracket always contains the crossing.
pub fn pts_search(
    ctx: &BoundContext,
    axis: SearchAxis,
    params: &PtsParams,
) -> Result<PtsResult, BoundsError> {
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "threshold must lie in (0, 1), got {}",
            params.delta
        )));
    }
    let profile = AxisProfile::new(ctx, axis);
    let at_zero = profile.value(0.0);
    if params.delta >= at_zero {
        return Err(BoundsError::ThresholdUnreachable { delta: params.delta, at_zero });
    }
    let mut lo = 0.0f64;
    let mut hi = params.mu_max;
    let mut mu = params.mu0.unwrap_or_else(|| {
        ctx.intervals
            .iter()
            .map(|ib| ib.dims.a_pp.hypot(ib.dims.b_pp))
            .fold(0.0f64, f64::max)
    });
    if !(mu > lo && mu < hi) {
        mu = 0.5 * (lo + hi);
    }
    let mut val = profile.value(mu);
    for k in 1..=params.max_iter {
        if (val - params.delta).abs() <= params.eps {
            return Ok(PtsResult { mu_star: mu, bound: val, iterations: k, converged: true });
        }
        if val > params.delta {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        let g = profile.deriv(mu);
        let newton = mu - (val - params.delta) / g;
        mu = if g.is_finite() && g != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        val = profile.value(mu);
    }
    Ok(PtsResult { mu_star: mu, bound: val, iterations: params.max_iter, converged: false })
}

/// Box around the other vehicle outside of which the collision bound is at
/// or below the search threshold. Corners are `(s, y_e)` in the frame the
/// vehicle positions were given in, counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TightenedBox {
    pub center: [f64; 2],
    pub corners: [[f64; 2]; 4],
    /// Raw threshold-search offsets in the decoupled frames.
    pub mu1_star: f64,
    pub mu2_star: f64,
    pub delta: f64,
    pub methods: (DecoupleMethod, DecoupleMethod),
    pub iterations: [u32; 2],
    pub converged: bool,
}

impl TightenedBox {
    /// Smallest / largest corner coordinate per axis.
    pub fn aabb(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = self.corners[0];
        let mut hi = self.corners[0];
        for c in &self.corners[1..] {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }
}

/// Runs the per-axis threshold searches and assembles the safe box.
///
/// With equal methods the box is the decoupling preimage of the rectangle
/// `[-mu1*, mu1*] x [-mu2*, mu2*]` (a parallelogram; each edge line keeps
/// the full exterior certified because the per-axis factors are maximal at
/// zero offset). The mixed pairing takes axis one from the case-two shear
/// and axis two from the case-one shear; each transformed coordinate then
/// depends on a single aligned coordinate, so de-scaling the offsets gives
/// an axis-aligned box whose exterior satisfies the smaller of the two
/// shear bounds. Other mixed pairings have no such certificate and are
/// rejected.
pub fn tightened_bbox(
    ego: &VehicleDist,
    ov: &VehicleDist,
    n_phi: usize,
    method_axis1: DecoupleMethod,
    method_axis2: DecoupleMethod,
    params: &PtsParams,
) -> Result<TightenedBox, BoundsError> {
    let mixed = method_axis1 != method_axis2;
    if mixed && !(method_axis1 == DecoupleMethod::Us2 && method_axis2 == DecoupleMethod::Us1) {
        return Err(BoundsError::InvalidParameter(format!(
            "unsupported method pairing ({}, {}); use equal methods or (us2, us1)",
            method_axis1.as_str(),
            method_axis2.as_str()
        )));
    }
    let ctx1 = BoundContext::build(ego, ov, method_axis1, n_phi)?;
    let r1 = pts_search(&ctx1, SearchAxis::One, params)?;
    let (r2, half_axes) = if mixed {
        let ctx2 = BoundContext::build(ego, ov, method_axis2, n_phi)?;
        let r2 = pts_search(&ctx2, SearchAxis::Two, params)?;
        // Case-two shear: transformed axis one is s1 * d1; case-one shear:
        // transformed axis two is s2 * d2.
        let e1 = r1.mu_star / ctx1.decoupled.t.m[0][0].abs();
        let e2 = r2.mu_star / ctx2.decoupled.t.m[1][1].abs();
        (r2, [[e1, 0.0], [0.0, e2]])
    } else {
        let r2 = pts_search(&ctx1, SearchAxis::Two, params)?;
        let inv = ctx1.decoupled.t.inverse();
        let a1 = inv.apply([r1.mu_star, 0.0]);
        let a2 = inv.apply([0.0, r2.mu_star]);
        (r2, [a1, a2])
    };
    // Rotate the aligned-frame box back out of the ego-heading frame.
    let (sn, cs) = ego.heading.mean.sin_cos();
    let rot = |v: [f64; 2]| [cs * v[0] - sn * v[1], sn * v[0] + cs * v[1]];
    let u = rot(half_axes[0]);
    let w = rot(half_axes[1]);
    let center = ov.pos.mean;
    let corners = [
        [center[0] + u[0] + w[0], center[1] + u[1] + w[1]],
        [center[0] - u[0] + w[0], center[1] - u[1] + w[1]],
        [center[0] - u[0] - w[0], center[1] - u[1] - w[1]],
        [center[0] + u[0] - w[0], center[1] + u[1] - w[1]],
    ];
    Ok(TightenedBox {
        center,
        corners,
        mu1_star: r1.mu_star,
        mu2_star: r2.mu_star,
        delta: params.delta,
        methods: (method_axis1, method_axis2),
        iterations: [r1.iterations, r2.iterations],
        converged: r1.converged && r2.converged,
    })
}

/// Lateral road limits and the drivable range of path position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoadBounds {
    pub y_lo: f64,
    pub y_hi: f64,
    pub s_min: f64,
    pub s_max: f64,
}

/// A previous-plan knot the corridor is built around.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanPoint {
    pub s: f64,
    pub y_e: f64,
}

/// Per-step linear constraints: `alpha_lo * s + beta_lo <= y_e <=
/// alpha_hi * s + beta_hi` for `s` in `[s_lo, s_hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorridorStep {
    pub alpha_hi: f64,
    pub beta_hi: f64,
    pub alpha_lo: f64,
    pub beta_lo: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// False when no path position in the step's range leaves any lateral
    /// room between the bounds.
    pub feasible: bool,
}

impl CorridorStep {
    pub fn upper_at(&self, s: f64) -> f64 {
        self.alpha_hi * s + self.beta_hi
    }

    pub fn lower_at(&self, s: f64) -> f64 {
        self.alpha_lo * s + self.beta_lo
    }
}

/// Convex corridor: one constraint set per plan step.
#[derive(Clone, Debug, PartialEq)]
pub struct Corridor {
    pub steps: Vec<CorridorStep>,
}

impl Corridor {
    pub fn all_feasible(&self) -> bool {
        self.steps.iter().all(|s| s.feasible)
    }
}

/// Whether a box constrains the upper or lower corridor line.
const fn side_is_upper(center_y: f64) -> bool {
    center_y > 0.0
}

/// Lowest line at `at_s` that clears every requirement: minimizes
/// `alpha * at_s + beta` subject to `alpha * s + beta >= h` for each point
/// `(s, h)`. The two-variable program's optimum sits where two constraints
/// intersect, so scanning point pairs is exact; the road-edge endpoints are
/// always present, which keeps it bounded.
fn lowest_dominating_line(points: &[(f64, f64)], at_s: f64) -> (f64, f64) {
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let (s0, h0) = points[i];
            let (s1, h1) = points[j];
            if (s1 - s0).abs() < 1e-9 {
                continue;
            }
            let alpha = (h1 - h0) / (s1 - s0);
            let beta = h0 - alpha * s0;
            if points.iter().all(|&(s, h)| alpha * s + beta >= h - 1e-9) {
                let v = alpha * at_s + beta;
                if best.is_none_or(|(bv, _, _)| v < bv) {
                    best = Some((v, alpha, beta));
                }
            }
        }
    }
    match best {
        Some((_, alpha, beta)) => (alpha, beta),
        // Degenerate range: every point shares one s; hold the tallest.
        None => (0.0, points.iter().fold(f64::NEG_INFINITY, |m, &(_, h)| m.max(h))),
    }
}

/// Builds per-step upper/lower lateral lines from the previous plan and the
/// per-step safe boxes. Boxes centered above the centerline constrain from
/// above, the rest from below.
///
/// Within the step's s-range a same-side box requires the line to clear the
/// box's near-centerline extent across the box's own span; outside its span
/// a box imposes nothing. Among all lines meeting every requirement the one
/// leaving the most lateral room at the plan point is chosen, so with no
/// box in range the line is the road edge, alongside a box it is the box's
/// near edge, and on approach it ramps from the road edge to the box
/// corner.
pub fn build_corridor(
    plan: &[PlanPoint],
    boxes_per_step: &[Vec<TightenedBox>],
    road: &RoadBounds,
    delta_s: f64,
) -> Corridor {
    assert_eq!(plan.len(), boxes_per_step.len(), "one box list per plan step");
    let steps = plan
        .iter()
        .zip(boxes_per_step)
        .map(|(p, boxes)| {
            let s_lo = (p.s - delta_s).clamp(road.s_min, road.s_max);
            let s_hi = (p.s + delta_s).clamp(road.s_min, road.s_max);
            // Upper-side requirements are negated so one routine serves
            // both sides.
            let mut upper_pts = vec![(s_lo, -road.y_hi), (s_hi, -road.y_hi)];
            let mut lower_pts = vec![(s_lo, road.y_lo), (s_hi, road.y_lo)];
            for bx in boxes {
                let (lo, hi) = bx.aabb();
                let (c0, c1) = (lo[0].max(s_lo), hi[0].min(s_hi));
                if c0 > c1 {
                    continue;
                }
                if side_is_upper(bx.center[1]) {
                    upper_pts.push((c0, -lo[1]));
                    upper_pts.push((c1, -lo[1]));
                } else {
                    lower_pts.push((c0, hi[1]));
                    lower_pts.push((c1, hi[1]));
                }
            }
            let (al, bl) = lowest_dominating_line(&lower_pts, p.s);
            let (neg_ah, neg_bh) = lowest_dominating_line(&upper_pts, p.s);
            let (ah, bh) = (-neg_ah, -neg_bh);
            // The lateral gap is linear in s, so when the lines cross at
            // the plan point the step's usable path positions form a
            // half-line; clipping the s-range to it turns a transient
            // blockage ahead into a longitudinal hold-back constraint
            // instead of an empty step.
            let (mut s_lo, mut s_hi) = (s_lo, s_hi);
            let gap_slope = ah - al;
            let mut feasible = ah * p.s + bh >= al * p.s + bl;
            if !feasible && gap_slope.abs() > 1e-12 {
                let s_cross = (bl - bh) / gap_slope;
                if gap_slope > 0.0 && s_cross <= s_hi {
                    s_lo = s_lo.max(s_cross);
                    feasible = true;
                } else if gap_slope < 0.0 && s_cross >= s_lo {
                    s_hi = s_hi.min(s_cross);
                    feasible = true;
                }
            }
            CorridorStep { alpha_hi: ah, beta_hi: bh, alpha_lo: al, beta_lo: bl, s_lo, s_hi, feasible }
        })
        .collect();
    Corridor { steps }
}

/// State layout used by [`shift_plan`]: path position, lateral offset,
/// heading, speed, acceleration, yaw rate.
pub type PlanState = [f64; 6];

/// Advances a fixed-step plan by `shift_dt` for warm starting: each knot is
/// linearly interpolated `shift_dt` later along the plan, and knots past the
/// end extrapolate the final state at constant velocity.
pub fn shift_plan(plan: &[PlanState], shift_dt: f64, step_dt: f64) -> Vec<PlanState> {
    if plan.is_empty() || shift_dt == 0.0 {
        return plan.to_vec();
    }
    assert!(step_dt > 0.0 && shift_dt > 0.0, "time steps must be positive");
    let last = plan.len() - 1;
    let tau = shift_dt / step_dt;
    (0..plan.len())
        .map(|k| {
            let t = k as f64 + tau;
            let i0 = t.floor() as usize;
            if i0 < last {
                let f = t - i0 as f64;
                let (a, b) = (plan[i0], plan[i0 + 1]);
                std::array::from_fn(|c| a[c] + f * (b[c] - a[c]))
            } else {
                let extra = (t - last as f64) * step_dt;
                let mut x = plan[last];
                let (sn, cs) = x[2].sin_cos();
                x[0] += x[3] * cs * extra;
                x[1] += x[3] * sn * extra;
                x
            }
        })
        .collect()
}
