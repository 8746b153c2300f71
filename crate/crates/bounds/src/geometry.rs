//! Rectangle geometry: worst-case extents over heading intervals, combined
//! (Minkowski) boxes, transformed box dimensions, and an exact oriented
//! rectangle overlap test.

use crate::linalg::Transform2;
use crate::BoundsError;
use std::f64::consts::{FRAC_PI_2, PI};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Planar pose: position plus heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Vehicle footprint as a centered rectangle with half-length `a` (along
/// heading) and half-width `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectShape {
    pub a: f64,
    pub b: f64,
}

impl RectShape {
    pub fn new(a: f64, b: f64) -> Result<RectShape, BoundsError> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(BoundsError::InvalidParameter(format!(
                "rectangle half-dimensions must be positive, got a={a}, b={b}"
            )));
        }
        Ok(RectShape { a, b })
    }

    /// Circumscribing circle radius.
    pub fn radius(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// Closed heading interval; endpoints may be infinite (tail intervals).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadingInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Axis-aligned half-dimensions of the combined shape: the other vehicle's
/// worst-case hull over a heading interval, Minkowski-summed with the ego
/// rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedBox {
    pub a: f64,
    pub b: f64,
}

/// Half-dimensions of the axis-aligned box circumscribing a combined box
/// after a decoupling transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformedBox {
    pub a_pp: f64,
    pub b_pp: f64,
}

fn extent_x(shape: &RectShape, phi: f64) -> f64 {
    shape.a * phi.cos().abs() + shape.b * phi.sin().abs()
}

fn extent_y(shape: &RectShape, phi: f64) -> f64 {
    shape.a * phi.sin().abs() + shape.b * phi.cos().abs()
}

/// Worst-case axis-aligned half-extents `(ex, ey)` of the rectangle rotated
/// by any heading in the interval.
///
/// Both extent functions are piecewise sinusoids with period pi; maxima sit
/// at `+/- atan(b/a) + k*pi/2`, so the exact maximum over a closed interval
/// is attained at an endpoint or one of those stationary points. Infinite
/// (tail) intervals saturate both extents at the circumscribing radius.
pub fn hull_extents_over_interval(shape: &RectShape, interval: &HeadingInterval) -> (f64, f64) {
    let (lo, hi) = (interval.lo, interval.hi);
    debug_assert!(lo <= hi);
    let r = shape.radius();
    if !lo.is_finite() || !hi.is_finite() || hi - lo >= PI {
        return (r, r);
    }
    let phi_star = (shape.b / shape.a).atan();
    let mut ex = extent_x(shape, lo).max(extent_x(shape, hi));
    let mut ey = extent_y(shape, lo).max(extent_y(shape, hi));
    for base in [phi_star, -phi_star] {
        let k_min = ((lo - base) / FRAC_PI_2).ceil() as i64;
        let k_max = ((hi - base) / FRAC_PI_2).floor() as i64;
        for k in k_min..=k_max {
            let phi = base + k as f64 * FRAC_PI_2;
            ex = ex.max(extent_x(shape, phi));
            ey = ey.max(extent_y(shape, phi));
        }
    }
    (ex, ey)
}

/// Minkowski sum of the ego rectangle with the other vehicle's worst-case
/// hull over the relative-heading interval, as centered half-dimensions.
pub fn combined_box(ego: &RectShape, ov: &RectShape, interval: &HeadingInterval) -> CombinedBox {
    let (ex, ey) = hull_extents_over_interval(ov, interval);
    CombinedBox { a: ego.a + ex, b: ego.b + ey }
}

/// Half-dimensions of the axis-aligned box circumscribing the image of a
/// combined box under a decoupling transform: `abs(T) * [a, b]`.
///
/// For a rotation this is `a'' = |cos|a + |sin|b`, `b'' = |sin|a + |cos|b`;
/// for the two scale-shear cases the zero entry keeps one axis exact.
pub fn transform_box(t: &Transform2, bx: &CombinedBox) -> TransformedBox {
    let [a_pp, b_pp] = t.abs_apply([bx.a, bx.b]);
    TransformedBox { a_pp, b_pp }
}

/// Exact overlap test between two oriented rectangles (closed sets: touching
/// boundaries count as overlap), by separating-axis over the four edge
/// normals.
pub fn oriented_rect_overlap(
    pose_a: &Pose2,
    shape_a: &RectShape,
    pose_b: &Pose2,
    shape_b: &RectShape,
) -> bool {
    let (sa, ca) = pose_a.heading.sin_cos();
    let (sb, cb) = pose_b.heading.sin_cos();
    // Half-axis vectors of each rectangle.
    let ea = [
        [shape_a.a * ca, shape_a.a * sa],
        [-shape_a.b * sa, shape_a.b * ca],
    ];
    let eb = [
        [shape_b.a * cb, shape_b.a * sb],
        [-shape_b.b * sb, shape_b.b * cb],
    ];
    let d = [pose_b.x - pose_a.x, pose_b.y - pose_a.y];
    let axes = [[ca, sa], [-sa, ca], [cb, sb], [-sb, cb]];
    for u in axes {
        let dist = (d[0] * u[0] + d[1] * u[1]).abs();
        let ra = (ea[0][0] * u[0] + ea[0][1] * u[1]).abs() + (ea[1][0] * u[0] + ea[1][1] * u[1]).abs();
        let rb = (eb[0][0] * u[0] + eb[0][1] * u[1]).abs() + (eb[1][0] * u[0] + eb[1][1] * u[1]).abs();
        if dist > ra + rb {
            return false;
        }
    }
    true
}
