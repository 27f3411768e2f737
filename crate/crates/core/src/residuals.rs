//! Weighted hinge-constraint residuals and their analytic gradients.
//!
//! For one synchronized sample and axis parameters `x` the estimator uses two
//! scalar residuals:
//!
//! ```text
//! e_gyr(k, x) = w_gyr    * (|w1 x j1| - |w2 x j2|)
//! e_acc(k, x) = w_acc(k) * (j1 . a1 - j2 . a2)
//! ```
//!
//! The first vanishes for any hinge because both segments share the same
//! angular velocity perpendicular to the joint axis. The second vanishes when
//! the rotational acceleration components along the axis are small. Weights
//! multiply the residuals before squaring.
//!
//! `w_gyr` is the ratio of worst-case accelerometer and gyroscope noise
//! standard deviations, which equalizes the variance of the two residuals.
//! `w_acc(k)` down-weights samples whose accelerometer norms differ, since the
//! acceleration constraint cannot hold for those.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{spherical_jacobian, AxisParams, Vec3};

/// Below this perpendicular angular speed (rad/s) the gyroscope residual is
/// treated as non-differentiable and its gradient contribution is dropped.
pub const SINGULAR_PERP_SPEED: f64 = 1e-9;

/// One synchronized reading of both sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub t: f64,
    pub gyr1: Vec3,
    pub acc1: Vec3,
    pub gyr2: Vec3,
    pub acc2: Vec3,
}

/// Worst-case per-axis measurement noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// rad/s
    pub sigma_gyro: f64,
    /// m/s^2
    pub sigma_acc: f64,
}

impl NoiseModel {
    /// Noise levels of the reference sensors the method was developed with.
    pub const REFERENCE: NoiseModel = NoiseModel {
        sigma_gyro: 0.0050,
        sigma_acc: 0.0346,
    };

    pub fn new(sigma_gyro: f64, sigma_acc: f64) -> Result<Self> {
        let noise = Self {
            sigma_gyro,
            sigma_acc,
        };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_gyro > 0.0 && self.sigma_gyro.is_finite()) {
            return Err(Error::Config(format!(
                "gyroscope noise std must be positive, got {}",
                self.sigma_gyro
            )));
        }
        if !(self.sigma_acc > 0.0 && self.sigma_acc.is_finite()) {
            return Err(Error::Config(format!(
                "accelerometer noise std must be positive, got {}",
                self.sigma_acc
            )));
        }
        Ok(())
    }
}

/// Constant gyroscope residual weight `sigma_acc / sigma_gyro`.
pub fn base_weight(noise: &NoiseModel) -> Result<f64> {
    noise.validate()?;
    Ok(noise.sigma_acc / noise.sigma_gyro)
}

/// Per-sample accelerometer weight `sqrt(1 / (1 + (|a1| - |a2|)^2))`, in `(0, 1]`.
pub fn acc_weight(acc1: &Vec3, acc2: &Vec3) -> f64 {
    let diff = acc1.norm() - acc2.norm();
    (1.0 / (1.0 + diff * diff)).sqrt()
}

/// How the accelerometer residual of each sample is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccWeighting {
    Constant(f64),
    /// [`acc_weight`] evaluated on each sample.
    NormDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualWeights {
    pub w_gyro: f64,
    pub acc: AccWeighting,
}

impl ResidualWeights {
    pub fn new(w_gyro: f64, acc: AccWeighting) -> Self {
        Self { w_gyro, acc }
    }

    /// Gyroscope weight `w0` from the noise model, norm-difference accelerometer weights.
    pub fn weighted(noise: &NoiseModel) -> Result<Self> {
        Ok(Self::new(base_weight(noise)?, AccWeighting::NormDifference))
    }

    pub fn acc_weight_for(&self, sample: &SamplePair) -> f64 {
        match self.acc {
            AccWeighting::Constant(w) => w,
            AccWeighting::NormDifference => acc_weight(&sample.acc1, &sample.acc2),
        }
    }
}

pub fn gyro_residual(s: &SamplePair, x: &AxisParams, w_gyro: f64) -> f64 {
    w_gyro * (s.gyr1.cross(&x.j1()).norm() - s.gyr2.cross(&x.j2()).norm())
}

pub fn acc_residual(s: &SamplePair, x: &AxisParams, w_acc: f64) -> f64 {
    w_acc * (x.j1().dot(&s.acc1) - x.j2().dot(&s.acc2))
}

/// Gradient of `|omega x j|` with respect to `j`, or zero at the cone point.
pub fn perp_speed_gradient(omega: &Vec3, j: &Vec3) -> Vec3 {
    let c = omega.cross(j);
    let n = c.norm();
    if n < SINGULAR_PERP_SPEED {
        Vec3::zeros()
    } else {
        c.cross(omega) / n
    }
}

/// Axis values and spherical Jacobians at one parameter point, shared by all samples.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisFrame {
    pub j1: Vec3,
    pub j2: Vec3,
    pub dj1: (Vec3, Vec3),
    pub dj2: (Vec3, Vec3),
}

impl AxisFrame {
    pub fn new(x: &AxisParams) -> Self {
        Self {
            j1: x.j1(),
            j2: x.j2(),
            dj1: spherical_jacobian(x.theta1, x.phi1),
            dj2: spherical_jacobian(x.theta2, x.phi2),
        }
    }

    /// Chain rule from gradients w.r.t. `(j1, j2)` to the four spherical parameters.
    pub fn pull_back(&self, g1: &Vec3, g2: &Vec3) -> [f64; 4] {
        [
            self.dj1.0.dot(g1),
            self.dj1.1.dot(g1),
            self.dj2.0.dot(g2),
            self.dj2.1.dot(g2),
        ]
    }

    pub fn gyro(&self, s: &SamplePair, w: f64) -> (f64, [f64; 4]) {
        if w == 0.0 {
            return (0.0, [0.0; 4]);
        }
        let e = w * (s.gyr1.cross(&self.j1).norm() - s.gyr2.cross(&self.j2).norm());
        let g1 = perp_speed_gradient(&s.gyr1, &self.j1) * w;
        let g2 = perp_speed_gradient(&s.gyr2, &self.j2) * -w;
        (e, self.pull_back(&g1, &g2))
    }

    pub fn acc(&self, s: &SamplePair, w: f64) -> (f64, [f64; 4]) {
        if w == 0.0 {
            return (0.0, [0.0; 4]);
        }
        let e = w * (self.j1.dot(&s.acc1) - self.j2.dot(&s.acc2));
        (e, self.pull_back(&(s.acc1 * w), &(s.acc2 * -w)))
    }
}

pub fn gyro_residual_gradient(s: &SamplePair, x: &AxisParams, w_gyro: f64) -> [f64; 4] {
    AxisFrame::new(x).gyro(s, w_gyro).1
}

pub fn acc_residual_gradient(s: &SamplePair, x: &AxisParams, w_acc: f64) -> [f64; 4] {
    AxisFrame::new(x).acc(s, w_acc).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::FRAC_PI_2;

    fn sample(gyr1: Vec3, acc1: Vec3, gyr2: Vec3, acc2: Vec3) -> SamplePair {
        SamplePair {
            t: 0.0,
            gyr1,
            acc1,
            gyr2,
            acc2,
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    fn random_params(rng: &mut ChaCha8Rng) -> AxisParams {
        AxisParams::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.1..3.1),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.1..3.1),
        )
    }

    #[test]
    fn base_weight_values() {
        assert_eq!(base_weight(&NoiseModel::REFERENCE).unwrap(), 6.92);
        assert_eq!(base_weight(&NoiseModel::new(1.0, 1.0).unwrap()).unwrap(), 1.0);
        assert_relative_eq!(
            base_weight(&NoiseModel::new(0.004, 0.02).unwrap()).unwrap(),
            5.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn base_weight_rejects_non_positive() {
        let bad = NoiseModel {
            sigma_gyro: 0.0,
            sigma_acc: 1.0,
        };
        assert!(matches!(base_weight(&bad), Err(Error::Config(_))));
        assert!(NoiseModel::new(0.1, -1.0).is_err());
    }

    #[test]
    fn acc_weight_values() {
        let a = Vec3::new(3.0, 4.0, 0.0);
        let b = Vec3::new(0.0, 0.0, 5.0);
        assert_eq!(acc_weight(&a, &b), 1.0);
        let w = acc_weight(&(Vec3::z() * 9.81), &(Vec3::x() * 10.81));
        assert_abs_diff_eq!(w, 0.5f64.sqrt(), epsilon = 1e-12);
        let mut last = 1.0;
        for k in 1..50 {
            let w = acc_weight(&Vec3::zeros(), &(Vec3::x() * k as f64));
            assert!(w < last && w > 0.0);
            last = w;
        }
    }

    #[test]
    fn gyro_residual_cases() {
        let x = AxisParams::new(0.3, -0.7, 0.3, -0.7);
        let w = Vec3::new(0.5, -1.0, 2.0);
        assert_eq!(gyro_residual(&sample(w, w, w, w), &x, 1.0), 0.0);

        let x = AxisParams::new(0.2, 0.4, -0.9, 1.1);
        let (j1, j2) = (x.j1(), x.j2());
        let perp = j2.cross(&Vec3::x()).normalize();
        let s = sample(2.0 * j1, Vec3::zeros(), perp, Vec3::zeros());
        assert_abs_diff_eq!(gyro_residual(&s, &x, 1.0), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn acc_residual_cases() {
        let x = AxisParams::new(0.1, 0.2, 0.1, 0.2);
        let g = Vec3::z() * 9.81;
        assert_eq!(acc_residual(&sample(Vec3::zeros(), g, Vec3::zeros(), g), &x, 1.0), 0.0);

        let x = AxisParams::new(0.0, 0.0, FRAC_PI_2, 0.0);
        let s = sample(Vec3::zeros(), Vec3::x() * 3.0, Vec3::zeros(), Vec3::z());
        assert_abs_diff_eq!(acc_residual(&s, &x, 0.5), 1.0, epsilon = 1e-15);
        // opposite pairing adds the projections
        assert_abs_diff_eq!(acc_residual(&s, &x.with_flipped_j2(), 0.5), 2.0, epsilon = 1e-15);
    }

    fn central_difference(f: impl Fn(&AxisParams) -> f64, x: &AxisParams, h: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            let mut plus = x.to_array();
            let mut minus = x.to_array();
            plus[i] += h;
            minus[i] -= h;
            *o = (f(&AxisParams::from_array(plus)) - f(&AxisParams::from_array(minus))) / (2.0 * h);
        }
        out
    }

    fn relative_error(a: &[f64; 4], b: &[f64; 4]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        diff / scale.max(1e-8)
    }

    #[test]
    fn gyro_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 1000 {
            let s = sample(
                random_vec(&mut rng, 4.0),
                random_vec(&mut rng, 12.0),
                random_vec(&mut rng, 4.0),
                random_vec(&mut rng, 12.0),
            );
            let x = random_params(&mut rng);
            if s.gyr1.cross(&x.j1()).norm() < 1e-4 || s.gyr2.cross(&x.j2()).norm() < 1e-4 {
                continue;
            }
            let w = rng.random_range(0.1..10.0);
            let fd = central_difference(|p| gyro_residual(&s, p, w), &x, 1e-6);
            let an = gyro_residual_gradient(&s, &x, w);
            assert!(relative_error(&an, &fd) < 1e-5, "{an:?} vs {fd:?}");
            checked += 1;
        }
    }

    #[test]
    fn acc_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let s = sample(
                Vec3::zeros(),
                random_vec(&mut rng, 12.0),
                Vec3::zeros(),
                random_vec(&mut rng, 12.0),
            );
            let x = random_params(&mut rng);
            let w = rng.random_range(0.1..1.0);
            let fd = central_difference(|p| acc_residual(&s, p, w), &x, 1e-6);
            let an = acc_residual_gradient(&s, &x, w);
            assert!(relative_error(&an, &fd) < 1e-7, "{an:?} vs {fd:?}");
        }
    }

    #[test]
    fn gradients_vanish_without_signal() {
        let x = AxisParams::new(0.4, 0.1, -0.3, 2.0);
        let still = sample(Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
        assert_eq!(gyro_residual_gradient(&still, &x, 6.92), [0.0; 4]);
        assert_eq!(acc_residual_gradient(&still, &x, 1.0), [0.0; 4]);
    }

    #[test]
    fn acc_gradient_azimuth_vanishes_at_pole() {
        let x = AxisParams::new(FRAC_PI_2, 0.7, 0.2, -0.4);
        let s = sample(Vec3::zeros(), Vec3::new(1.0, -2.0, 3.0), Vec3::zeros(), Vec3::new(0.5, 0.5, 9.0));
        let g = acc_residual_gradient(&s, &x, 1.0);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);
        // d/dtheta1 at the pole is -(cos phi, sin phi, 0) . a1
        assert_abs_diff_eq!(g[0], -(0.7f64.cos() * 1.0 + 0.7f64.sin() * -2.0), epsilon = 1e-14);
    }

    #[test]
    fn gyro_residual_sign_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = sample(
                random_vec(&mut rng, 3.0),
                random_vec(&mut rng, 10.0),
                random_vec(&mut rng, 3.0),
                random_vec(&mut rng, 10.0),
            );
            let x = random_params(&mut rng);
            let e = gyro_residual(&s, &x, 2.0);
            assert_abs_diff_eq!(gyro_residual(&s, &x.with_flipped_j2(), 2.0), e, epsilon = 1e-12);
            let flip1 = AxisParams::new(-x.theta1, x.phi1 + std::f64::consts::PI, x.theta2, x.phi2);
            assert_abs_diff_eq!(gyro_residual(&s, &flip1, 2.0), e, epsilon = 1e-12);
            let ea = acc_residual(&s, &x, 1.0);
            assert_abs_diff_eq!(acc_residual(&s, &x.negated(), 1.0), -ea, epsilon = 1e-12);
        }
    }

    #[test]
    fn gyro_residual_variance_matches_delta_method() {
        let sigma = 1e-3;
        let w = 6.92;
        let x = AxisParams::new(0.3, 1.2, -0.5, -2.0);
        let base = sample(
            Vec3::new(1.0, -0.5, 0.8),
            Vec3::zeros(),
            Vec3::new(-0.3, 1.4, 0.2),
            Vec3::zeros(),
        );
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000;
        let mut values = Vec::with_capacity(draws);
        for _ in 0..draws {
            let mut s = base;
            for v in s.gyr1.iter_mut().chain(s.gyr2.iter_mut()) {
                *v += normal.sample(&mut rng);
            }
            values.push(gyro_residual(&s, &x, w));
        }
        let mean = values.iter().sum::<f64>() / draws as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let predicted = 2.0 * sigma * sigma * w * w;
        assert!((var / predicted - 1.0).abs() < 0.1, "{var} vs {predicted}");
    }

    proptest! {
        #[test]
        fn acc_weight_bounded(a in proptest::array::uniform3(-50.0f64..50.0), b in proptest::array::uniform3(-50.0f64..50.0)) {
            let w = acc_weight(&Vec3::from(a), &Vec3::from(b));
            prop_assert!(w > 0.0 && w <= 1.0);
        }

        #[test]
        fn joint_negation_flips_acc_residual_sign(
            theta1 in -1.5f64..1.5, phi1 in -3.0f64..3.0,
            theta2 in -1.5f64..1.5, phi2 in -3.0f64..3.0,
            a1 in proptest::array::uniform3(-20.0f64..20.0),
            a2 in proptest::array::uniform3(-20.0f64..20.0),
        ) {
            let x = AxisParams::new(theta1, phi1, theta2, phi2);
            let s = sample(Vec3::zeros(), Vec3::from(a1), Vec3::zeros(), Vec3::from(a2));
            let e = acc_residual(&s, &x, 1.0);
            let neg = acc_residual(&s, &x.negated(), 1.0);
            prop_assert!((e + neg).abs() < 1e-12);
        }
    }
}
