//! Conformal chart between the physical plane and the tilde plane.
//!
//! The working chart is the branch-selected square root P(z) = sqrt(z - c)
//! with the cut along the ray from c at angle `cut_angle`. Its inverse
//! P^{-1}(z) = z^2 + c is entire, so pulling curves back is always safe;
//! pushing forward requires staying off the cut. An identity chart is kept
//! alongside for tests and manufactured solutions.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Rotation by +90 degrees. Normals transform as n~ = -Lambda J Lambda n.
pub fn lambda() -> Mat2 {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// 2x2 matrix of the complex number a+ib acting by multiplication on R^2.
pub fn complex_as_matrix(c: Complex64) -> Mat2 {
    Matrix2::new(c.re, -c.im, c.im, c.re)
}

fn as_complex(v: Vec2) -> Complex64 {
    Complex64::new(v.x, v.y)
}

fn from_complex(c: Complex64) -> Vec2 {
    Vec2::new(c.re, c.im)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("point ({x:.6}, {y:.6}) lies on the branch cut (distance {dist:.3e}, tol {tol:.3e})")]
    OnBranchCut { x: f64, y: f64, dist: f64, tol: f64 },
    #[error("chart derivative is singular at the tilde-plane origin")]
    SingularAtOrigin,
}

/// Square-root chart with branch cut along the ray at `cut_angle` from `center`.
///
/// The half-angle branch is chosen so arguments live in (cut_angle - 2*pi,
/// cut_angle]; with the default cut_angle = pi this is the principal branch
/// and the image is the closed right half-plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SqrtChart {
    pub center: [f64; 2],
    pub cut_angle: f64,
    /// Absolute fraction of |z - center| below which a point counts as on-cut.
    pub cut_rel_tol: f64,
}

impl Default for SqrtChart {
    fn default() -> Self {
        SqrtChart { center: [0.0, 0.0], cut_angle: std::f64::consts::PI, cut_rel_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Chart {
    Identity,
    Sqrt(SqrtChart),
}

impl Chart {
    pub fn sqrt_default() -> Self {
        Chart::Sqrt(SqrtChart::default())
    }

    /// Distance from a physical point to the branch cut ray. Infinite for the
    /// identity chart (it has no cut).
    pub fn distance_to_cut(&self, z: Vec2) -> f64 {
        match self {
            Chart::Identity => f64::INFINITY,
            Chart::Sqrt(c) => {
                let w = z - Vec2::new(c.center[0], c.center[1]);
                let dir = Vec2::new(c.cut_angle.cos(), c.cut_angle.sin());
                let along = w.dot(&dir);
                if along <= 0.0 {
                    // Nearest cut point is the ray tip (the chart center).
                    w.norm()
                } else {
                    (w - dir * along).norm()
                }
            }
        }
    }

    /// Forward map P. Errors on the cut, where the branch is discontinuous.
    pub fn forward(&self, z: Vec2) -> Result<Vec2, ChartError> {
        match self {
            Chart::Identity => Ok(z),
            Chart::Sqrt(c) => {
                let w = z - Vec2::new(c.center[0], c.center[1]);
                let r = w.norm();
                let dist = self.distance_to_cut(z);
                if dist <= c.cut_rel_tol * (1.0 + r) {
                    return Err(ChartError::OnBranchCut { x: z.x, y: z.y, dist, tol: c.cut_rel_tol * (1.0 + r) });
                }
                // Argument in (cut_angle - 2*pi, cut_angle).
                let raw = w.y.atan2(w.x);
                let two_pi = 2.0 * std::f64::consts::PI;
                let mut theta = raw;
                while theta >= c.cut_angle {
                    theta -= two_pi;
                }
                while theta < c.cut_angle - two_pi {
                    theta += two_pi;
                }
                let half = 0.5 * theta;
                Ok(Vec2::new(r.sqrt() * half.cos(), r.sqrt() * half.sin()))
            }
        }
    }

    /// Inverse map P^{-1}; entire, no branch issues.
    pub fn inverse(&self, zt: Vec2) -> Vec2 {
        match self {
            Chart::Identity => zt,
            Chart::Sqrt(c) => {
                let s = as_complex(zt) * as_complex(zt);
                from_complex(s) + Vec2::new(c.center[0], c.center[1])
            }
        }
    }

    /// Real 2x2 Jacobian J^P at the tilde point `zt`, i.e. the matrix of the
    /// complex derivative dP/dz = 1/(2 zt) evaluated at z = P^{-1}(zt).
    pub fn jacobian(&self, zt: Vec2) -> Result<Mat2, ChartError> {
        match self {
            Chart::Identity => Ok(Mat2::identity()),
            Chart::Sqrt(_) => {
                let n2 = zt.norm_squared();
                if n2 == 0.0 {
                    return Err(ChartError::SingularAtOrigin);
                }
                let d = Complex64::new(1.0, 0.0) / (2.0 * as_complex(zt));
                Ok(complex_as_matrix(d))
            }
        }
    }

    /// Inverse Jacobian (J^P)^{-1} = (J^P)^T / Q^2; for the square-root chart
    /// this is the matrix of 2 zt.
    pub fn jacobian_inv(&self, zt: Vec2) -> Result<Mat2, ChartError> {
        match self {
            Chart::Identity => Ok(Mat2::identity()),
            Chart::Sqrt(_) => {
                if zt.norm_squared() == 0.0 {
                    return Err(ChartError::SingularAtOrigin);
                }
                Ok(complex_as_matrix(2.0 * as_complex(zt)))
            }
        }
    }

    /// Conformal metric factor Q^2 = |dP/dz|^2 = det J^P.
    pub fn metric_q2(&self, zt: Vec2) -> Result<f64, ChartError> {
        match self {
            Chart::Identity => Ok(1.0),
            Chart::Sqrt(_) => {
                let n2 = zt.norm_squared();
                if n2 == 0.0 {
                    return Err(ChartError::SingularAtOrigin);
                }
                Ok(1.0 / (4.0 * n2))
            }
        }
    }

    /// Push a physical normal vector through the chart: n~ = -Lambda J^P Lambda n.
    /// Not normalized; the caller decides whether to rescale.
    pub fn transformed_normal(&self, n: Vec2, zt: Vec2) -> Result<Vec2, ChartError> {
        let j = self.jacobian(zt)?;
        let lam = lambda();
        Ok(-(lam * j * lam) * n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    const EXACT: f64 = 1e-10;

    #[test]
    fn forward_matches_principal_sqrt_on_axis_points() {
        let ch = Chart::sqrt_default();
        // sqrt(i) = (1+i)/sqrt(2)
        let p = ch.forward(Vec2::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p.x, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let p = ch.forward(Vec2::new(4.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_errors_on_cut() {
        let ch = Chart::sqrt_default();
        assert!(matches!(
            ch.forward(Vec2::new(-0.5, 0.0)),
            Err(ChartError::OnBranchCut { .. })
        ));
        // Center itself is on the cut (tip of the ray).
        assert!(ch.forward(Vec2::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn jacobian_known_values() {
        let ch = Chart::sqrt_default();
        let j = ch.jacobian(Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(j, Matrix2::new(0.5, 0.0, 0.0, 0.5), epsilon = 1e-14);
        let j = ch.jacobian(Vec2::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(j, Matrix2::new(0.0, 0.5, -0.5, 0.0), epsilon = 1e-14);
        let j = ch.jacobian(Vec2::new(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(j, Matrix2::new(0.25, 0.0, 0.0, 0.25), epsilon = 1e-14);
    }

    #[test]
    fn q2_known_values_and_det_identity() {
        let ch = Chart::sqrt_default();
        assert_abs_diff_eq!(ch.metric_q2(Vec2::new(1.0, 0.0)).unwrap(), 0.25, epsilon = EXACT);
        assert_abs_diff_eq!(ch.metric_q2(Vec2::new(2.0, 0.0)).unwrap(), 0.0625, epsilon = EXACT);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let zt = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            if zt.norm() < 1e-3 {
                continue;
            }
            let q2 = ch.metric_q2(zt).unwrap();
            let det = ch.jacobian(zt).unwrap().determinant();
            assert!((q2 - det).abs() <= EXACT * (1.0 + q2.abs()));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        // Independent check: FD of the forward map at z = P^{-1}(zt), since
        // J^P is defined as the derivative of P evaluated there.
        let ch = Chart::sqrt_default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            // Stay in the image half-plane, away from the origin.
            let zt = Vec2::new(rng.gen_range(0.2..2.0), rng.gen_range(-1.5..1.5));
            let z = ch.inverse(zt);
            let h = 1e-6;
            let mut fd = Mat2::zeros();
            for jcol in 0..2 {
                let mut dp = Vec2::zeros();
                dp[jcol] = h;
                let plus = ch.forward(z + dp).unwrap();
                let minus = ch.forward(z - dp).unwrap();
                let col = (plus - minus) / (2.0 * h);
                fd[(0, jcol)] = col.x;
                fd[(1, jcol)] = col.y;
            }
            let j = ch.jacobian(zt).unwrap();
            assert!((fd - j).norm() <= 1e-5, "fd {fd} vs analytic {j} at {zt:?}");
        }
    }

    #[test]
    fn transformed_normal_example() {
        let ch = Chart::sqrt_default();
        let nt = ch.transformed_normal(Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(nt.x, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nt.y, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn transformed_normal_stays_normal_to_pushed_tangents() {
        // If t is tangent to a curve at z, J^P t is tangent to the image curve,
        // and the transformed normal must be orthogonal to it.
        let ch = Chart::sqrt_default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let zt = Vec2::new(rng.gen_range(0.2..2.0), rng.gen_range(-1.5..1.5));
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let t = Vec2::new(ang.cos(), ang.sin());
            let n = Vec2::new(-t.y, t.x);
            let j = ch.jacobian(zt).unwrap();
            let nt = ch.transformed_normal(n, zt).unwrap();
            assert!((j * t).dot(&nt).abs() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_bulk_off_cut() {
        let ch = Chart::sqrt_default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut count = 0;
        while count < 1000 {
            let r = rng.gen_range(0.05..10.0f64);
            let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let z = Vec2::new(r * a.cos(), r * a.sin());
            if ch.distance_to_cut(z) < 1e-6 * (1.0 + r) {
                continue;
            }
            count += 1;
            let back = ch.inverse(ch.forward(z).unwrap());
            assert!((back - z).norm() <= EXACT * (1.0 + z.norm()));
        }
    }

    proptest! {
        #[test]
        fn roundtrip_forward_inverse(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let ch = Chart::sqrt_default();
            let z = Vec2::new(x, y);
            prop_assume!(ch.distance_to_cut(z) > 1e-6 * (1.0 + z.norm()));
            let back = ch.inverse(ch.forward(z).unwrap());
            prop_assert!((back - z).norm() <= 1e-10 * (1.0 + z.norm()));
        }

        #[test]
        fn image_halfplane_roundtrip(x in 0.05f64..3.0, y in -3.0f64..3.0) {
            // P(P^{-1}) = id holds on the open image half-plane for cut at pi.
            let ch = Chart::sqrt_default();
            let zt = Vec2::new(x, y);
            let fwd = ch.forward(ch.inverse(zt)).unwrap();
            prop_assert!((fwd - zt).norm() <= 1e-10 * (1.0 + zt.norm()));
        }

        #[test]
        fn jacobian_is_cauchy_riemann(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let ch = Chart::sqrt_default();
            let zt = Vec2::new(x, y);
            prop_assume!(zt.norm() > 1e-3);
            let j = ch.jacobian(zt).unwrap();
            prop_assert!((j[(0, 0)] - j[(1, 1)]).abs() < 1e-14);
            prop_assert!((j[(0, 1)] + j[(1, 0)]).abs() < 1e-14);
        }
    }
}
