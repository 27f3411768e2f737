//! Recover gyro bias, accelerometer gain and noise levels from a rest period.
//!
//! ```bash
//! cargo run --example stationary_calibration
//! ```

use hinge_axis::calibration::{apply_calibration, calibrate_stationary, STANDARD_GRAVITY};
use hinge_axis::simulator::{simulate, AxisMode, HingeScenario, SpeedProfileKind};
use hinge_axis::{NoiseModel, Vec3};

fn main() -> hinge_axis::Result<()> {
    let mut scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 40.0)
        .with_noise(NoiseModel::REFERENCE)
        .with_seed(11);
    scenario.stationary_preamble = 10.0;
    scenario.gyro_bias1 = Vec3::new(0.012, -0.004, 0.02);
    scenario.gyro_bias2 = Vec3::new(-0.008, 0.015, 0.001);
    scenario.acc_scale1 = 1.02;
    scenario.acc_scale2 = 0.97;

    let (recording, _) = simulate(&scenario)?;
    let rest = recording.time_range(0.0, 10.0);
    let cal = calibrate_stationary(&rest, STANDARD_GRAVITY)?;

    for (i, (s, bias, scale)) in [
        (cal.sensor1, scenario.gyro_bias1, scenario.acc_scale1),
        (cal.sensor2, scenario.gyro_bias2, scenario.acc_scale2),
    ]
    .into_iter()
    .enumerate()
    {
        println!("sensor {}", i + 1);
        println!("  gyro bias  {:?} (true {:?})", s.gyro_bias.as_slice(), bias.as_slice());
        println!("  acc gain   {:.5} (true {:.5})", s.acc_gain, 1.0 / scale);
        println!("  sigma gyro {:.5}  sigma acc {:.5}", s.sigma_gyro, s.sigma_acc);
    }
    println!("w0 = {:.3} (reference noise gives {:.3})", cal.w0, 0.0346 / 0.0050);

    let corrected = apply_calibration(&recording, &cal.sensor1, &cal.sensor2);
    let mean_norm = corrected.time_range(0.0, 10.0).iter().map(|s| s.acc1.norm()).sum::<f64>() / rest.len() as f64;
    println!("corrected rest |acc1| = {mean_norm:.4} m/s^2");
    Ok(())
}
