//! Generate a noisy free-axis recording and check the ground truth.
//!
//! ```bash
//! cargo run --example simulate_hinge
//! ```

use hinge_axis::residuals::{acc_residual, gyro_residual};
use hinge_axis::simulator::{simulate, AxisMode, HingeScenario, SpeedProfileKind};
use hinge_axis::{AxisPair, AxisParams, NoiseModel};

fn main() -> hinge_axis::Result<()> {
    for mode in AxisMode::ALL {
        for speed in SpeedProfileKind::MOVING {
            let scenario = HingeScenario::new(mode, speed, 60.0);
            let (recording, truth) = simulate(&scenario)?;
            let s = truth.summary();
            let (j1, j2) = truth.axes();
            let x = AxisParams::from_axes(&AxisPair::new(j1, j2)?)?;

            // noise-free data satisfies the gyro constraint exactly at the true axes
            let worst_gyro = recording
                .samples
                .iter()
                .map(|p| gyro_residual(p, &x, 1.0).abs())
                .fold(0.0, f64::max);
            let worst_acc = recording
                .samples
                .iter()
                .zip(truth.rotational_acc_difference())
                .map(|(p, rhs)| (acc_residual(p, &x, 1.0) - rhs).abs())
                .fold(0.0, f64::max);
            println!(
                "{:<10} {:<5} joint rate max {:.2} mean {:.2} sd {:.2} rad/s | gyro res {:.1e} | acc res - K term {:.1e}",
                mode.name(),
                speed.name(),
                s.max_joint_rate,
                s.mean_joint_rate,
                s.std_joint_rate,
                worst_gyro,
                worst_acc
            );
        }
    }

    let noisy = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 10.0)
        .with_noise(NoiseModel::REFERENCE)
        .with_seed(7);
    let (recording, _) = simulate(&noisy)?;
    let first = recording.samples[0];
    println!("\nfirst noisy sample: gyr1 {:?} acc1 {:?}", first.gyr1.as_slice(), first.acc1.as_slice());
    Ok(())
}
