//! Rigid-body and geometric primitives shared by the estimator and the simulator.
//!
//! Vectors and matrices are plain `nalgebra` types. The joint axis of each
//! sensor is carried as spherical angles (elevation `theta`, azimuth `phi`)
//! so that the unit-norm constraint holds by construction:
//!
//! ```text
//! j(theta, phi) = (cos theta cos phi, cos theta sin phi, sin theta)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `|j| - 1` accepted when a Cartesian axis enters the library.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// The rotational acceleration matrix `K(w, dw)` with `K r = w x (w x r) + dw x r`.
pub fn rotational_acc_matrix(omega: &Vec3, omega_dot: &Vec3) -> Mat3 {
    let (wx, wy, wz) = (omega.x, omega.y, omega.z);
    let (dx, dy, dz) = (omega_dot.x, omega_dot.y, omega_dot.z);
    Mat3::new(
        -wy * wy - wz * wz,
        wx * wy - dz,
        wx * wz + dy,
        wx * wy + dz,
        -wx * wx - wz * wz,
        wy * wz - dx,
        wx * wz - dy,
        wy * wz + dx,
        -wx * wx - wy * wy,
    )
}

pub fn spherical_to_axis(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(ct * cp, ct * sp, st)
}

/// Partial derivatives `(dj/dtheta, dj/dphi)` of [`spherical_to_axis`].
pub fn spherical_jacobian(theta: f64, phi: f64) -> (Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (
        Vec3::new(-st * cp, -st * sp, ct),
        Vec3::new(-ct * sp, ct * cp, 0.0),
    )
}

/// Inverse of [`spherical_to_axis`].
///
/// Returns `theta` in `[-pi/2, pi/2]` and `phi` in `(-pi, pi]`. At the poles
/// the azimuth is undefined and is reported as 0.
pub fn axis_to_spherical(j: &Vec3) -> Result<(f64, f64)> {
    let norm = j.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit { norm });
    }
    let j = j / norm;
    let horizontal = j.x.hypot(j.y);
    let theta = j.z.atan2(horizontal);
    let phi = if horizontal == 0.0 {
        0.0
    } else {
        wrap_angle(j.y.atan2(j.x))
    };
    Ok((theta, phi))
}

/// Magnitude of the component of `omega` perpendicular to the unit axis `j`.
pub fn perp_angular_speed(omega: &Vec3, j: &Vec3) -> f64 {
    omega.cross(j).norm()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Brings `(theta, phi)` into the canonical chart without changing the axis.
///
/// `theta` is reflected into `[-pi/2, pi/2]`, shifting `phi` by `pi` on each
/// reflection, and `phi` is wrapped into `(-pi, pi]`.
pub fn canonical_spherical(theta: f64, phi: f64) -> (f64, f64) {
    // theta and theta + 2pi describe the same axis
    let mut theta = wrap_angle(theta);
    let mut phi = phi;
    if theta > FRAC_PI_2 {
        theta = PI - theta;
        phi += PI;
    } else if theta < -FRAC_PI_2 {
        theta = -PI - theta;
        phi += PI;
    }
    let phi = if theta.abs() == FRAC_PI_2 { 0.0 } else { wrap_angle(phi) };
    (theta, phi)
}

/// The joint axis expressed in both sensor frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPair {
    pub j1: Vec3,
    pub j2: Vec3,
}

impl AxisPair {
    /// Normalizes both axes, rejecting inputs that are not unit within [`UNIT_TOLERANCE`].
    pub fn new(j1: Vec3, j2: Vec3) -> Result<Self> {
        Ok(Self {
            j1: checked_unit(&j1)?,
            j2: checked_unit(&j2)?,
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            j1: -self.j1,
            j2: -self.j2,
        }
    }

    /// Flips only the second axis, producing the opposite sign pairing.
    pub fn with_flipped_j2(&self) -> Self {
        Self {
            j1: self.j1,
            j2: -self.j2,
        }
    }
}

pub(crate) fn checked_unit(j: &Vec3) -> Result<Vec3> {
    let norm = j.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit { norm });
    }
    Ok(j / norm)
}

/// Parameter vector `[theta1, phi1, theta2, phi2]` of the estimator, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisParams {
    pub theta1: f64,
    pub phi1: f64,
    pub theta2: f64,
    pub phi2: f64,
}

impl AxisParams {
    pub fn new(theta1: f64, phi1: f64, theta2: f64, phi2: f64) -> Self {
        Self {
            theta1,
            phi1,
            theta2,
            phi2,
        }
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta1, self.phi1, self.theta2, self.phi2]
    }

    pub fn from_axes(axes: &AxisPair) -> Result<Self> {
        let (theta1, phi1) = axis_to_spherical(&axes.j1)?;
        let (theta2, phi2) = axis_to_spherical(&axes.j2)?;
        Ok(Self::new(theta1, phi1, theta2, phi2))
    }

    pub fn j1(&self) -> Vec3 {
        spherical_to_axis(self.theta1, self.phi1)
    }

    pub fn j2(&self) -> Vec3 {
        spherical_to_axis(self.theta2, self.phi2)
    }

    pub fn axes(&self) -> AxisPair {
        AxisPair {
            j1: self.j1(),
            j2: self.j2(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Same axes, canonical angle ranges.
    pub fn canonical(&self) -> Self {
        let (theta1, phi1) = canonical_spherical(self.theta1, self.phi1);
        let (theta2, phi2) = canonical_spherical(self.theta2, self.phi2);
        Self::new(theta1, phi1, theta2, phi2)
    }

    /// Parameters of `(-j1, -j2)`.
    pub fn negated(&self) -> Self {
        Self::new(-self.theta1, self.phi1 + PI, -self.theta2, self.phi2 + PI)
    }

    /// Parameters of `(j1, -j2)`.
    pub fn with_flipped_j2(&self) -> Self {
        Self::new(self.theta1, self.phi1, -self.theta2, self.phi2 + PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    #[test]
    fn k_matrix_zero_motion() {
        assert_eq!(rotational_acc_matrix(&Vec3::zeros(), &Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn k_matrix_pure_x_rotation() {
        let k = rotational_acc_matrix(&Vec3::x(), &Vec3::zeros());
        assert_eq!(k, Mat3::from_diagonal(&Vec3::new(0.0, -1.0, -1.0)));
    }

    #[test]
    fn k_matrix_matches_cross_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let w = random_vec(&mut rng, 5.0);
            let dw = random_vec(&mut rng, 20.0);
            let r = random_vec(&mut rng, 0.5);
            let expected = w.cross(&w.cross(&r)) + dw.cross(&r);
            let got = rotational_acc_matrix(&w, &dw) * r;
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn spherical_special_points() {
        assert_abs_diff_eq!(spherical_to_axis(0.0, 0.0), Vec3::x(), epsilon = 1e-15);
        assert_abs_diff_eq!(spherical_to_axis(FRAC_PI_2, 1.234), Vec3::z(), epsilon = 1e-15);
        assert_abs_diff_eq!(spherical_to_axis(0.0, FRAC_PI_2), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn inverse_at_pole_and_equator() {
        let (theta, phi) = axis_to_spherical(&Vec3::z()).unwrap();
        assert_eq!((theta, phi), (FRAC_PI_2, 0.0));
        assert_eq!(axis_to_spherical(&Vec3::x()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn inverse_rejects_non_unit() {
        let err = axis_to_spherical(&Vec3::new(1.0, 1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NotUnit { .. }));
    }

    #[test]
    fn round_trip_uniform_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let z: f64 = rng.random_range(-1.0..1.0);
            let az: f64 = rng.random_range(-PI..PI);
            let r = (1.0 - z * z).sqrt();
            let j = Vec3::new(r * az.cos(), r * az.sin(), z);
            let (theta, phi) = axis_to_spherical(&j).unwrap();
            assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&theta));
            assert!(phi > -PI && phi <= PI);
            worst = worst.max((spherical_to_axis(theta, phi) - j).norm());
        }
        assert!(worst < 1e-9, "worst round-trip error {worst}");
    }

    #[test]
    fn perp_speed_cases() {
        let j = Vec3::new(1.0, 2.0, -2.0) / 3.0;
        assert_abs_diff_eq!(perp_angular_speed(&(2.0 * j), &j), 0.0, epsilon = 1e-15);
        let perp = j.cross(&Vec3::x()).normalize() * 3.0;
        assert_abs_diff_eq!(perp_angular_speed(&perp, &j), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn perp_speed_matches_projection_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let w = random_vec(&mut rng, 5.0);
            let j = random_vec(&mut rng, 1.0).normalize();
            let projection = (w - j.dot(&w) * j).norm();
            assert_abs_diff_eq!(perp_angular_speed(&w, &j), projection, epsilon = 1e-12);
        }
    }

    #[test]
    fn canonical_reflects_theta() {
        let (theta, phi) = canonical_spherical(2.0, 0.3);
        assert_abs_diff_eq!(theta, PI - 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi, 0.3 + PI - 2.0 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(
            spherical_to_axis(theta, phi),
            spherical_to_axis(2.0, 0.3),
            epsilon = 1e-14
        );
    }

    proptest! {
        #[test]
        fn axis_is_unit(theta in -50.0f64..50.0, phi in -50.0f64..50.0) {
            prop_assert!((spherical_to_axis(theta, phi).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn inverse_is_identity_on_chart(theta in -FRAC_PI_2 + 1e-4..FRAC_PI_2 - 1e-4, phi in -PI + 1e-5..PI - 1e-5) {
            let (t, p) = axis_to_spherical(&spherical_to_axis(theta, phi)).unwrap();
            prop_assert!((t - theta).abs() < 1e-9);
            prop_assert!((p - phi).abs() < 1e-9);
        }

        #[test]
        fn perp_speed_sign_insensitive(
            w in proptest::array::uniform3(-10.0f64..10.0),
            theta in -1.5f64..1.5,
            phi in -3.0f64..3.0,
        ) {
            let w = Vec3::from(w);
            let j = spherical_to_axis(theta, phi);
            prop_assert_eq!(perp_angular_speed(&w, &j), perp_angular_speed(&w, &-j));
        }

        #[test]
        fn canonical_keeps_axis(theta in -20.0f64..20.0, phi in -20.0f64..20.0) {
            let (t, p) = canonical_spherical(theta, phi);
            prop_assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&t));
            prop_assert!(p > -PI && p <= PI);
            let diff = (spherical_to_axis(t, p) - spherical_to_axis(theta, phi)).norm();
            prop_assert!(diff < 1e-12);
        }
    }
}
