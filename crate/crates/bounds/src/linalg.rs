//! Closed-form 2x2 symmetric eigendecomposition and the covariance
//! decoupling transforms built on it.
//!
//! Everything here is specialized to 2x2 because the deviation state between
//! two vehicles is planar; closed forms beat a general eigensolver both in
//! speed (these run inside per-step, per-interval loops of an MPC) and in
//! reproducibility.

use crate::BoundsError;

/// Condition-number cap (`lambda2 / lambda1`) beyond which decoupling
/// transforms are refused instead of silently amplifying roundoff.
pub const COND_CAP: f64 = 1e12;

/// Symmetric positive-definite 2x2 covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cov2 {
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
}

impl Cov2 {
    /// Validates positive definiteness: both variances positive and
    /// `det = sxx*syy - sxy^2 > 0`.
    pub fn new(sxx: f64, sxy: f64, syy: f64) -> Result<Cov2, BoundsError> {
        let ok = sxx.is_finite()
            && sxy.is_finite()
            && syy.is_finite()
            && sxx > 0.0
            && syy > 0.0
            && sxx * syy - sxy * sxy > 0.0;
        if !ok {
            return Err(BoundsError::NotPositiveDefinite { sxx, sxy, syy });
        }
        Ok(Cov2 { sxx, sxy, syy })
    }

    pub fn diagonal(sxx: f64, syy: f64) -> Result<Cov2, BoundsError> {
        Cov2::new(sxx, 0.0, syy)
    }

    /// Builds from standard deviations and a correlation coefficient.
    pub fn from_std(sx: f64, sy: f64, rho: f64) -> Result<Cov2, BoundsError> {
        Cov2::new(sx * sx, rho * sx * sy, sy * sy)
    }

    pub fn det(&self) -> f64 {
        self.sxx * self.syy - self.sxy * self.sxy
    }

    /// Sum of two covariances (covariance of the difference of two
    /// independent Gaussian vectors).
    pub fn add(&self, other: &Cov2) -> Cov2 {
        Cov2 {
            sxx: self.sxx + other.sxx,
            sxy: self.sxy + other.sxy,
            syy: self.syy + other.syy,
        }
    }

    /// Congruence by a rotation: `R(angle) * S * R(angle)^T`.
    pub fn rotated(&self, angle: f64) -> Cov2 {
        let (s, c) = angle.sin_cos();
        let (a, b, d) = (self.sxx, self.sxy, self.syy);
        Cov2 {
            sxx: c * c * a - 2.0 * s * c * b + s * s * d,
            sxy: s * c * (a - d) + (c * c - s * s) * b,
            syy: s * s * a + 2.0 * s * c * b + c * c * d,
        }
    }

    /// Lower-triangular Cholesky factor `L` with `L L^T = S`, as
    /// `(l11, l21, l22)`. Exists because construction enforced SPD.
    pub fn chol_lower(&self) -> (f64, f64, f64) {
        let l11 = self.sxx.sqrt();
        let l21 = self.sxy / l11;
        let l22 = (self.syy - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }
}

/// Eigendecomposition of a [`Cov2`], eigenvalues sorted `lambda1 <= lambda2`,
/// eigenvectors unit-norm with `v2` the +90 degree rotation of `v1`
/// (the eigenvector matrix is a proper rotation).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair2 {
    pub lambda1: f64,
    pub lambda2: f64,
    pub v1: [f64; 2],
    pub v2: [f64; 2],
}

/// Closed-form eigendecomposition.
///
/// An exactly diagonal input short-circuits to the canonical basis vectors
/// ordered by variance; otherwise the first eigenvector is taken from the
/// null space of `S - lambda1 I`, using whichever diagonal gap is computed
/// without cancellation.
pub fn eig_sym2(cov: &Cov2) -> EigenPair2 {
    let Cov2 { sxx, sxy, syy } = *cov;
    let tr = sxx + syy;
    let disc = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    let lambda1 = 0.5 * (tr - disc);
    let lambda2 = 0.5 * (tr + disc);
    if sxy == 0.0 {
        // Canonical eigenvectors, ordered by variance.
        return if sxx <= syy {
            EigenPair2 { lambda1, lambda2, v1: [1.0, 0.0], v2: [0.0, 1.0] }
        } else {
            EigenPair2 { lambda1, lambda2, v1: [0.0, 1.0], v2: [-1.0, 0.0] }
        };
    }
    // d1 = sxx - lambda1 >= 0. When sxx < syy the direct difference
    // cancels; (sxx - l1)(syy - l1) = sxy^2 gives a stable route.
    let d1 = if sxx >= syy {
        0.5 * (sxx - syy + disc)
    } else {
        sxy * sxy / (0.5 * (syy - sxx + disc))
    };
    let n = (sxy * sxy + d1 * d1).sqrt();
    let v1 = [-sxy / n, d1 / n];
    let v2 = [-v1[1], v1[0]];
    EigenPair2 { lambda1, lambda2, v1, v2 }
}

/// Tags how a [`Transform2`] may be specialized downstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Rotation,
    ScaleShear,
    General,
}

/// Dense 2x2 linear map, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform2 {
    pub m: [[f64; 2]; 2],
    pub kind: TransformKind,
}

impl Transform2 {
    pub fn identity() -> Transform2 {
        Transform2 { m: [[1.0, 0.0], [0.0, 1.0]], kind: TransformKind::Rotation }
    }

    /// Active rotation by `theta`: `[[cos, -sin], [sin, cos]]`.
    pub fn rotation(theta: f64) -> Transform2 {
        let (s, c) = theta.sin_cos();
        Transform2 { m: [[c, -s], [s, c]], kind: TransformKind::Rotation }
    }

    pub fn new(m: [[f64; 2]; 2], kind: TransformKind) -> Transform2 {
        Transform2 { m, kind }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Entrywise absolute value applied to a vector; the half-dimensions of
    /// the axis-aligned box that circumscribes the image of a centered box.
    pub fn abs_apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0].abs() * v[0] + self.m[0][1].abs() * v[1],
            self.m[1][0].abs() * v[0] + self.m[1][1].abs() * v[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Transform2 {
        let d = self.det();
        Transform2 {
            m: [
                [self.m[1][1] / d, -self.m[0][1] / d],
                [-self.m[1][0] / d, self.m[0][0] / d],
            ],
            kind: if self.kind == TransformKind::Rotation {
                TransformKind::Rotation
            } else {
                TransformKind::General
            },
        }
    }

    pub fn mul(&self, rhs: &Transform2) -> Transform2 {
        let a = &self.m;
        let b = &rhs.m;
        Transform2 {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
            kind: TransformKind::General,
        }
    }

    /// Congruence `T S T^T` of a symmetric matrix, returned as
    /// `(m11, m12, m22)` (not validated as a covariance).
    pub fn congruence(&self, cov: &Cov2) -> (f64, f64, f64) {
        let s = [[cov.sxx, cov.sxy], [cov.sxy, cov.syy]];
        let t = &self.m;
        // B = T * S
        let b = [
            [
                t[0][0] * s[0][0] + t[0][1] * s[1][0],
                t[0][0] * s[0][1] + t[0][1] * s[1][1],
            ],
            [
                t[1][0] * s[0][0] + t[1][1] * s[1][0],
                t[1][0] * s[0][1] + t[1][1] * s[1][1],
            ],
        ];
        // B * T^T
        (
            b[0][0] * t[0][0] + b[0][1] * t[0][1],
            b[0][0] * t[1][0] + b[0][1] * t[1][1],
            b[1][0] * t[1][0] + b[1][1] * t[1][1],
        )
    }
}

/// Principal-axes rotation decoupling the covariance: returns `(theta, T)`
/// with `T = R(theta)` and `T S T^T = diag(lambda1, lambda2)`.
///
/// `theta = -atan((lambda1 - sxx) / sxy)` for correlated input, so
/// `|theta| <= pi/2`; an exactly diagonal covariance short-circuits to
/// `theta = 0` with the identity transform.
pub fn principal_rotation(cov: &Cov2) -> (f64, Transform2) {
    if cov.sxy == 0.0 {
        return (0.0, Transform2::identity());
    }
    let eig = eig_sym2(cov);
    let theta = -((eig.lambda1 - cov.sxx) / cov.sxy).atan();
    (theta, Transform2::rotation(theta))
}

/// Inverse symmetric square root `T0 = S^(-1/2)`, satisfying
/// `T0 S T0^T = I`. Refuses inputs with eigenvalue ratio above [`COND_CAP`].
pub fn inv_sqrt_cov(cov: &Cov2) -> Result<Transform2, BoundsError> {
    let eig = eig_sym2(cov);
    if eig.lambda1 <= 0.0 {
        return Err(BoundsError::NotPositiveDefinite {
            sxx: cov.sxx,
            sxy: cov.sxy,
            syy: cov.syy,
        });
    }
    let cond = eig.lambda2 / eig.lambda1;
    if cond > COND_CAP {
        return Err(BoundsError::IllConditioned { cond, cap: COND_CAP });
    }
    let (r1, r2) = (eig.lambda1.sqrt().recip(), eig.lambda2.sqrt().recip());
    let [v11, v12] = eig.v1;
    let [v21, v22] = eig.v2;
    Ok(Transform2 {
        m: [
            [r1 * v11 * v11 + r2 * v21 * v21, r1 * v11 * v12 + r2 * v21 * v22],
            [r1 * v11 * v12 + r2 * v21 * v22, r1 * v12 * v12 + r2 * v22 * v22],
        ],
        kind: TransformKind::General,
    })
}

/// Which triangle the shear factor lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShearCase {
    /// `H = [[1, h], [0, 1]]`; `S H` is upper triangular.
    One,
    /// `H = [[1, 0], [h, 1]]`; `S H` is lower triangular.
    Two,
}

/// Rotation-scale-shear factorization `T0 = R(alpha) * S * H` of the inverse
/// covariance square root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RshFactors {
    pub alpha: f64,
    pub s1: f64,
    pub s2: f64,
    pub h: f64,
    pub case: ShearCase,
}

impl RshFactors {
    pub fn rotation(&self) -> Transform2 {
        Transform2::rotation(self.alpha)
    }

    /// The rotation-free part `T = S H` actually applied to deviations:
    /// case one `[[s1, s1*h], [0, s2]]`, case two `[[s1, 0], [s2*h, s2]]`.
    pub fn scale_shear(&self) -> Transform2 {
        let m = match self.case {
            ShearCase::One => [[self.s1, self.s1 * self.h], [0.0, self.s2]],
            ShearCase::Two => [[self.s1, 0.0], [self.s2 * self.h, self.s2]],
        };
        Transform2 { m, kind: TransformKind::ScaleShear }
    }
}

/// Factors `S^(-1/2)` as rotation * scale * shear by solving the entrywise
/// system for the requested shear case.
///
/// Scales come out positive because `S^(-1/2)` is itself SPD (its diagonal
/// and determinant are positive), which also keeps `alpha` in
/// `(-pi/2, pi/2)`.
pub fn rsh_decompose(cov: &Cov2, case: ShearCase) -> Result<RshFactors, BoundsError> {
    let t0 = inv_sqrt_cov(cov)?;
    let (t11, t12, t22) = (t0.m[0][0], t0.m[0][1], t0.m[1][1]);
    let det = t11 * t22 - t12 * t12;
    Ok(match case {
        ShearCase::One => {
            let s1 = t11.hypot(t12);
            RshFactors {
                alpha: (t12 / t11).atan(),
                s1,
                s2: det / s1,
                h: t12 * (t11 + t22) / (t11 * t11 + t12 * t12),
                case,
            }
        }
        ShearCase::Two => {
            let s2 = t12.hypot(t22);
            RshFactors {
                alpha: (-t12 / t22).atan(),
                s1: det / s2,
                s2,
                h: t12 * (t11 + t22) / (t12 * t12 + t22 * t22),
                case,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Test oracle: cyclic Jacobi rotations, independent of the closed form.
    fn jacobi_eig(cov: &Cov2) -> (f64, f64) {
        let mut a = [[cov.sxx, cov.sxy], [cov.sxy, cov.syy]];
        for _ in 0..60 {
            if a[0][1].abs() < 1e-300 {
                break;
            }
            let tau = (a[1][1] - a[0][0]) / (2.0 * a[0][1]);
            let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            let (a00, a01, a11) = (a[0][0], a[0][1], a[1][1]);
            a[0][0] = c * c * a00 - 2.0 * s * c * a01 + s * s * a11;
            a[1][1] = s * s * a00 + 2.0 * s * c * a01 + c * c * a11;
            a[0][1] = 0.0;
            a[1][0] = 0.0;
            let _ = a01;
        }
        let (l1, l2) = (a[0][0], a[1][1]);
        (l1.min(l2), l1.max(l2))
    }

    fn random_cov(rng: &mut ChaCha8Rng) -> Cov2 {
        let sx: f64 = rng.random_range(0.05..5.0);
        let sy: f64 = rng.random_range(0.05..5.0);
        let rho: f64 = rng.random_range(-0.99..0.99);
        Cov2::from_std(sx, sy, rho).unwrap()
    }

    #[test]
    fn rejects_non_spd() {
        assert!(Cov2::new(1.0, 1.5, 1.0).is_err()); // |rho| > 1
        assert!(Cov2::new(-1.0, 0.0, 1.0).is_err());
        assert!(Cov2::new(1.0, 0.0, 0.0).is_err());
        assert!(Cov2::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn eig_diagonal_canonical() {
        let e = eig_sym2(&Cov2::diagonal(4.0, 1.0).unwrap());
        assert_eq!((e.lambda1, e.lambda2), (1.0, 4.0));
        assert_eq!(e.v1, [0.0, 1.0]);
        assert_eq!(e.v2, [-1.0, 0.0]);
        let e = eig_sym2(&Cov2::diagonal(1.0, 4.0).unwrap());
        assert_eq!(e.v1, [1.0, 0.0]);
        assert_eq!(e.v2, [0.0, 1.0]);
    }

    #[test]
    fn eig_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let cov = random_cov(&mut rng);
            let e = eig_sym2(&cov);
            let (j1, j2) = jacobi_eig(&cov);
            assert_abs_diff_eq!(e.lambda1, j1, epsilon = 1e-9 * (1.0 + j2));
            assert_abs_diff_eq!(e.lambda2, j2, epsilon = 1e-9 * (1.0 + j2));
        }
    }

    #[test]
    fn eig_residual_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..2000 {
            let cov = random_cov(&mut rng);
            let e = eig_sym2(&cov);
            for (l, v) in [(e.lambda1, e.v1), (e.lambda2, e.v2)] {
                let rx = cov.sxx * v[0] + cov.sxy * v[1] - l * v[0];
                let ry = cov.sxy * v[0] + cov.syy * v[1] - l * v[1];
                assert!(rx.hypot(ry) < 1e-10 * (1.0 + l), "residual {rx} {ry}");
            }
            let dot = e.v1[0] * e.v2[0] + e.v1[1] * e.v2[1];
            let det = e.v1[0] * e.v2[1] - e.v1[1] * e.v2[0];
            assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(det, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn principal_rotation_diagonalizes_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..2000 {
            let cov = random_cov(&mut rng);
            let e = eig_sym2(&cov);
            let (theta, t) = principal_rotation(&cov);
            assert!(theta.abs() <= std::f64::consts::FRAC_PI_2);
            let (d11, d12, d22) = t.congruence(&cov);
            let scale = 1.0 + e.lambda2;
            assert_abs_diff_eq!(d12, 0.0, epsilon = 1e-9 * scale);
            assert_abs_diff_eq!(d11, e.lambda1, epsilon = 1e-9 * scale);
            assert_abs_diff_eq!(d22, e.lambda2, epsilon = 1e-9 * scale);
        }
    }

    #[test]
    fn principal_rotation_diagonal_is_identity() {
        let (theta, t) = principal_rotation(&Cov2::diagonal(4.0, 1.0).unwrap());
        assert_eq!(theta, 0.0);
        assert_eq!(t.m, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn inv_sqrt_whitens() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..2000 {
            let cov = random_cov(&mut rng);
            let t0 = inv_sqrt_cov(&cov).unwrap();
            let (d11, d12, d22) = t0.congruence(&cov);
            assert_abs_diff_eq!(d11, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(d12, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(d22, 1.0, epsilon = 1e-9);
            // Symmetric by construction.
            assert_eq!(t0.m[0][1], t0.m[1][0]);
        }
    }

    #[test]
    fn inv_sqrt_condition_cap() {
        let cov = Cov2::diagonal(1e-8, 1e8).unwrap();
        match inv_sqrt_cov(&cov) {
            Err(BoundsError::IllConditioned { cond, .. }) => assert!(cond > 1e12),
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }

    #[test]
    fn rsh_reconstructs_t0() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..2000 {
            let cov = random_cov(&mut rng);
            let t0 = inv_sqrt_cov(&cov).unwrap();
            for case in [ShearCase::One, ShearCase::Two] {
                let f = rsh_decompose(&cov, case).unwrap();
                assert!(f.s1 > 0.0 && f.s2 > 0.0);
                assert!(f.alpha.abs() < std::f64::consts::FRAC_PI_2);
                let recon = f.rotation().mul(&f.scale_shear());
                let norm = t0.m[0][0].abs() + t0.m[1][1].abs();
                for i in 0..2 {
                    for j in 0..2 {
                        assert_abs_diff_eq!(recon.m[i][j], t0.m[i][j], epsilon = 1e-9 * norm);
                    }
                }
            }
        }
    }

    /// Cross-check the triangular-solve factors against the independent
    /// eigenvalue-space expressions for s1, s2, h.
    #[test]
    fn rsh_matches_eigen_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..500 {
            let cov = random_cov(&mut rng);
            let e = eig_sym2(&cov);
            let [v11, v12] = e.v1;
            let (l1, l2) = (e.lambda1, e.lambda2);

            let f1 = rsh_decompose(&cov, ShearCase::One).unwrap();
            let m1 = v12 * v12 * l1 + v11 * v11 * l2;
            assert_abs_diff_eq!(f1.s1, (m1 / (l1 * l2)).sqrt(), epsilon = 1e-9 * (1.0 + f1.s1));
            assert_abs_diff_eq!(f1.s2, m1.sqrt().recip(), epsilon = 1e-9 * (1.0 + f1.s2));
            assert_abs_diff_eq!(f1.h, v11 * v12 * (l2 - l1) / m1, epsilon = 1e-9);

            let f2 = rsh_decompose(&cov, ShearCase::Two).unwrap();
            let m2 = v11 * v11 * l1 + v12 * v12 * l2;
            assert_abs_diff_eq!(f2.s2, (m2 / (l1 * l2)).sqrt(), epsilon = 1e-9 * (1.0 + f2.s2));
            assert_abs_diff_eq!(f2.s1, m2.sqrt().recip(), epsilon = 1e-9 * (1.0 + f2.s1));
            assert_abs_diff_eq!(f2.h, v11 * v12 * (l2 - l1) / m2, epsilon = 1e-9);
        }
    }

    #[test]
    fn rsh_diagonal_covariance_has_no_shear() {
        for case in [ShearCase::One, ShearCase::Two] {
            let f = rsh_decompose(&Cov2::diagonal(4.0, 0.25).unwrap(), case).unwrap();
            assert_abs_diff_eq!(f.h, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(f.alpha, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(f.s1, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(f.s2, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_inverse_roundtrip() {
        let t = Transform2::new([[2.0, 0.5], [-1.0, 3.0]], TransformKind::General);
        let inv = t.inverse();
        let p = t.mul(&inv);
        assert_abs_diff_eq!(p.m[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.m[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.m[1][0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.m[1][1], 1.0, epsilon = 1e-15);
    }
}
