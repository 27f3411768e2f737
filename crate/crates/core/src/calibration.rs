//! Stationary calibration: gyroscope bias, accelerometer scalar gain and
//! worst-case noise levels, estimated from a segment where both sensors rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Vec3;
use crate::recording::RecordingPair;
use crate::residuals::{base_weight, NoiseModel, SamplePair};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Largest per-axis gyroscope std (rad/s) accepted as "stationary".
pub const MAX_STATIONARY_GYRO_STD: f64 = 0.05;
/// Largest accelerometer-norm std (m/s^2) accepted as "stationary".
pub const MAX_STATIONARY_ACC_NORM_STD: f64 = 0.5;
pub const MIN_NOISE_SAMPLES: usize = 30;
/// Floor for estimated noise std so the base weight stays finite.
pub const SIGMA_FLOOR: f64 = 1e-9;

const AXES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibration {
    /// rad/s
    pub gyro_bias: Vec3,
    pub acc_gain: f64,
    /// rad/s, worst axis of this sensor
    pub sigma_gyro: f64,
    /// m/s^2, worst axis of this sensor
    pub sigma_acc: f64,
}

impl SensorCalibration {
    pub fn identity() -> Self {
        Self {
            gyro_bias: Vec3::zeros(),
            acc_gain: 1.0,
            sigma_gyro: 1.0,
            sigma_acc: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.acc_gain > 0.0 && self.acc_gain.is_finite()) {
            return Err(Error::Config(format!("acc_gain must be positive, got {}", self.acc_gain)));
        }
        if !(self.sigma_gyro > 0.0 && self.sigma_acc > 0.0) {
            return Err(Error::Config("noise std must be positive".into()));
        }
        if !self.gyro_bias.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("gyro_bias must be finite".into()));
        }
        Ok(())
    }
}

/// Calibration of both sensors from one stationary segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryCalibration {
    pub sensor1: SensorCalibration,
    pub sensor2: SensorCalibration,
    /// Worst-case noise over all six axes of each sensor type.
    pub noise: NoiseModel,
    /// Gyroscope residual weight `sigma_acc / sigma_gyro`.
    pub w0: f64,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values.iter().copied());
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

fn axis_variances(samples: &[Vec3]) -> [f64; 3] {
    std::array::from_fn(|i| sample_variance(&samples.iter().map(|v| v[i]).collect::<Vec<_>>()))
}

/// Gyroscope bias as the component-wise sample mean.
pub fn estimate_gyro_bias(stationary: &[Vec3]) -> Result<Vec3> {
    if stationary.len() < 2 {
        return Err(Error::InvalidArgument(
            "gyroscope bias needs at least two stationary samples".into(),
        ));
    }
    for (axis, var) in axis_variances(stationary).into_iter().enumerate() {
        let std = var.sqrt();
        if std > MAX_STATIONARY_GYRO_STD {
            return Err(Error::NotStationary {
                quantity: format!("gyroscope {} axis", AXES[axis]),
                std,
                limit: MAX_STATIONARY_GYRO_STD,
            });
        }
    }
    Ok(stationary.iter().sum::<Vec3>() / stationary.len() as f64)
}

/// Scalar gain `gamma` minimizing `sum (gamma |a_k| - g)^2`.
pub fn estimate_acc_gain(stationary: &[Vec3], g: f64) -> Result<f64> {
    if stationary.len() < 2 {
        return Err(Error::InvalidArgument(
            "accelerometer gain needs at least two stationary samples".into(),
        ));
    }
    let norms: Vec<f64> = stationary.iter().map(|a| a.norm()).collect();
    if let Some((index, &norm)) = norms.iter().enumerate().find(|(_, &n)| n < 0.1 * g) {
        return Err(Error::ImplausibleStationary { index, norm });
    }
    let std = sample_variance(&norms).sqrt();
    if std > MAX_STATIONARY_ACC_NORM_STD {
        return Err(Error::NotStationary {
            quantity: "accelerometer norm".into(),
            std,
            limit: MAX_STATIONARY_ACC_NORM_STD,
        });
    }
    let sum: f64 = norms.iter().sum();
    let sum_sq: f64 = norms.iter().map(|n| n * n).sum();
    Ok(g * sum / sum_sq)
}

fn floored(sigma: f64, what: &str) -> f64 {
    if sigma < SIGMA_FLOOR {
        log::warn!("{what} noise std {sigma:e} is below {SIGMA_FLOOR:e}; using the floor");
        SIGMA_FLOOR
    } else {
        sigma
    }
}

fn worst_axis_std(streams: &[&[Vec3]]) -> f64 {
    streams
        .iter()
        .flat_map(|s| axis_variances(s))
        .fold(0.0, f64::max)
        .sqrt()
}

/// Worst-case noise std per sensor type: square root of the largest sample
/// variance over the six axes of both sensors.
pub fn estimate_noise_std(stationary: &[SamplePair]) -> Result<NoiseModel> {
    if stationary.len() < MIN_NOISE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "noise estimation needs at least {MIN_NOISE_SAMPLES} samples, got {}",
            stationary.len()
        )));
    }
    let pick = |f: fn(&SamplePair) -> Vec3| stationary.iter().map(f).collect::<Vec<_>>();
    let (g1, g2, a1, a2) = (pick(|s| s.gyr1), pick(|s| s.gyr2), pick(|s| s.acc1), pick(|s| s.acc2));
    Ok(NoiseModel {
        sigma_gyro: floored(worst_axis_std(&[&g1, &g2]), "gyroscope"),
        sigma_acc: floored(worst_axis_std(&[&a1, &a2]), "accelerometer"),
    })
}

/// Subtracts each sensor's gyroscope bias and scales its accelerometer by the gain.
pub fn apply_calibration(
    recording: &RecordingPair,
    cal1: &SensorCalibration,
    cal2: &SensorCalibration,
) -> RecordingPair {
    let samples = recording
        .samples
        .iter()
        .map(|s| SamplePair {
            t: s.t,
            gyr1: s.gyr1 - cal1.gyro_bias,
            acc1: s.acc1 * cal1.acc_gain,
            gyr2: s.gyr2 - cal2.gyro_bias,
            acc2: s.acc2 * cal2.acc_gain,
        })
        .collect();
    RecordingPair {
        samples,
        sample_rate: recording.sample_rate,
        metadata: recording.metadata.clone(),
    }
}

fn tag_sensor(err: Error, sensor: usize) -> Error {
    match err {
        Error::NotStationary {
            quantity,
            std,
            limit,
        } => Error::NotStationary {
            quantity: format!("sensor {sensor} {quantity}"),
            std,
            limit,
        },
        other => other,
    }
}

/// Full calibration of both sensors from stationary samples.
///
/// Noise levels are measured after bias and gain have been applied.
pub fn calibrate_stationary(stationary: &[SamplePair], g: f64) -> Result<StationaryCalibration> {
    if stationary.len() < MIN_NOISE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "noise estimation needs at least {MIN_NOISE_SAMPLES} samples, got {}",
            stationary.len()
        )));
    }
    let pick = |f: fn(&SamplePair) -> Vec3| stationary.iter().map(f).collect::<Vec<_>>();
    let sensor = |gyr: Vec<Vec3>, acc: Vec<Vec3>, index: usize| -> Result<SensorCalibration> {
        let gyro_bias = estimate_gyro_bias(&gyr).map_err(|e| tag_sensor(e, index))?;
        let acc_gain = estimate_acc_gain(&acc, g).map_err(|e| tag_sensor(e, index))?;
        let gyr: Vec<Vec3> = gyr.iter().map(|w| w - gyro_bias).collect();
        let acc: Vec<Vec3> = acc.iter().map(|a| a * acc_gain).collect();
        Ok(SensorCalibration {
            gyro_bias,
            acc_gain,
            sigma_gyro: floored(worst_axis_std(&[&gyr]), "gyroscope"),
            sigma_acc: floored(worst_axis_std(&[&acc]), "accelerometer"),
        })
    };
    let sensor1 = sensor(pick(|s| s.gyr1), pick(|s| s.acc1), 1)?;
    let sensor2 = sensor(pick(|s| s.gyr2), pick(|s| s.acc2), 2)?;
    let noise = NoiseModel {
        sigma_gyro: sensor1.sigma_gyro.max(sensor2.sigma_gyro),
        sigma_acc: sensor1.sigma_acc.max(sensor2.sigma_acc),
    };
    Ok(StationaryCalibration {
        sensor1,
        sensor2,
        noise,
        w0: base_weight(&noise)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy(center: Vec3, sigma: [f64; 3], n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<_> = sigma.iter().map(|&s| Normal::new(0.0, s).unwrap()).collect();
        (0..n)
            .map(|_| center + Vec3::new(d[0].sample(&mut rng), d[1].sample(&mut rng), d[2].sample(&mut rng)))
            .collect()
    }

    #[test]
    fn bias_of_constant_and_two_points() {
        let b = Vec3::new(0.01, -0.02, 0.003);
        assert_abs_diff_eq!(estimate_gyro_bias(&[b; 10]).unwrap(), b, epsilon = 1e-15);
        let two = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)];
        // spread of 1.41 rad/s is far from stationary
        assert!(matches!(estimate_gyro_bias(&two), Err(Error::NotStationary { .. })));
        let two = [Vec3::new(0.01, 0.0, 0.0), Vec3::new(0.03, 0.0, 0.0)];
        assert_abs_diff_eq!(estimate_gyro_bias(&two).unwrap(), Vec3::new(0.02, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn bias_of_zero_mean_noise_is_small() {
        let sigma = 0.005;
        let n = 4000;
        let bias = estimate_gyro_bias(&noisy(Vec3::zeros(), [sigma; 3], n, 1)).unwrap();
        assert!(bias.amax() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn moving_gyro_is_rejected() {
        let moving: Vec<Vec3> = (0..100).map(|k| Vec3::new(0.0, (k as f64 * 0.3).sin(), 0.0)).collect();
        match estimate_gyro_bias(&moving) {
            Err(Error::NotStationary { quantity, .. }) => assert!(quantity.contains("y axis")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gain_closed_forms() {
        let unit = |n: f64| Vec3::new(0.0, 0.0, n);
        assert_abs_diff_eq!(estimate_acc_gain(&[unit(9.81); 5], 9.81).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(estimate_acc_gain(&[unit(10.0); 5], 9.81).unwrap(), 0.981, epsilon = 1e-15);
        let mixed = [unit(9.7), unit(9.9)];
        assert_abs_diff_eq!(estimate_acc_gain(&mixed, 9.81).unwrap(), 9.81 * 19.6 / 192.1, epsilon = 1e-14);
    }

    #[test]
    fn gain_rejects_free_fall() {
        let data = [Vec3::new(0.0, 0.0, 9.8), Vec3::new(0.0, 0.0, 0.5)];
        assert!(matches!(
            estimate_acc_gain(&data, 9.81),
            Err(Error::ImplausibleStationary { index: 1, .. })
        ));
    }

    #[test]
    fn noise_std_recovers_worst_axis() {
        let n = 2000;
        let g1 = noisy(Vec3::zeros(), [0.004, 0.005, 0.003], n, 2);
        let g2 = noisy(Vec3::zeros(), [0.003, 0.003, 0.003], n, 3);
        let a1 = noisy(Vec3::new(0.0, 0.0, 9.81), [0.02; 3], n, 4);
        let a2 = noisy(Vec3::new(0.0, 0.0, 9.81), [0.03, 0.01, 0.01], n, 5);
        let samples: Vec<_> = (0..n)
            .map(|k| SamplePair {
                t: k as f64 * 0.01,
                gyr1: g1[k],
                acc1: a1[k],
                gyr2: g2[k],
                acc2: a2[k],
            })
            .collect();
        let noise = estimate_noise_std(&samples).unwrap();
        assert!((noise.sigma_gyro / 0.005 - 1.0).abs() < 0.15);
        assert!((noise.sigma_acc / 0.03 - 1.0).abs() < 0.15);
        assert!(estimate_noise_std(&samples[..29]).is_err());
    }

    #[test]
    fn zero_noise_is_floored() {
        let s = SamplePair {
            t: 0.0,
            gyr1: Vec3::zeros(),
            acc1: Vec3::z() * 9.81,
            gyr2: Vec3::zeros(),
            acc2: Vec3::z() * 9.81,
        };
        let noise = estimate_noise_std(&[s; 40]).unwrap();
        assert_eq!((noise.sigma_gyro, noise.sigma_acc), (SIGMA_FLOOR, SIGMA_FLOOR));
        let cal = calibrate_stationary(&[s; 40], STANDARD_GRAVITY).unwrap();
        assert!(cal.w0.is_finite());
    }

    #[test]
    fn identity_calibration_is_noop() {
        let rec = RecordingPair::from_samples(
            (0..5)
                .map(|k| SamplePair {
                    t: k as f64,
                    gyr1: Vec3::new(1.0, 2.0, 3.0),
                    acc1: Vec3::new(0.1, 0.2, 9.8),
                    gyr2: Vec3::new(-1.0, 0.0, 0.5),
                    acc2: Vec3::new(0.0, 9.7, 0.0),
                })
                .collect(),
        )
        .unwrap();
        let id = SensorCalibration::identity();
        assert_eq!(apply_calibration(&rec, &id, &id), rec);
        let scaled = SensorCalibration {
            acc_gain: 1.5,
            ..id
        };
        let out = apply_calibration(&rec, &scaled, &id);
        for (a, b) in out.samples.iter().zip(&rec.samples) {
            assert_abs_diff_eq!(a.acc1.norm(), 1.5 * b.acc1.norm(), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn bias_is_shift_equivariant(shift in proptest::array::uniform3(-1.0f64..1.0), seed in 0u64..1000) {
            let data = noisy(Vec3::new(0.01, 0.0, -0.02), [0.004; 3], 50, seed);
            let c = Vec3::from(shift);
            let shifted: Vec<_> = data.iter().map(|v| v + c).collect();
            let diff = estimate_gyro_bias(&shifted).unwrap() - (estimate_gyro_bias(&data).unwrap() + c);
            prop_assert!(diff.amax() < 1e-12);
        }

        #[test]
        fn gain_is_inverse_scale_equivariant(scale in 0.5f64..2.0, seed in 0u64..1000) {
            let data = noisy(Vec3::new(0.1, -0.2, 9.7), [0.03; 3], 50, seed);
            let scaled: Vec<_> = data.iter().map(|v| v * scale).collect();
            let lhs = estimate_acc_gain(&scaled, 9.81).unwrap();
            let rhs = estimate_acc_gain(&data, 9.81).unwrap() / scale;
            prop_assert!((lhs / rhs - 1.0).abs() < 1e-12);
        }
    }
}
