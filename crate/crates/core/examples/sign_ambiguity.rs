//! Gyroscope data alone cannot tell `(j1, j2)` from `(j1, -j2)`.
//!
//! Runs 100 random starts on the same window with gyro-only and weighted
//! residuals and counts how often the estimated pairing is correct.
//!
//! ```bash
//! cargo run --release --example sign_ambiguity
//! ```

use hinge_axis::evaluation::{resolve_sign, MethodSpec};
use hinge_axis::simulator::{simulate, AxisMode, HingeScenario, SpeedProfileKind};
use hinge_axis::solver::{cost, estimate_axes, random_initialization_stream};
use hinge_axis::{AxisPair, AxisParams, NoiseModel, SolverConfig};

fn main() -> hinge_axis::Result<()> {
    let scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 5.0)
        .with_noise(NoiseModel::REFERENCE)
        .with_seed(3);
    let (recording, truth) = simulate(&scenario)?;
    let (j1, j2) = truth.axes();
    let data = &recording.samples;

    let x = AxisParams::from_axes(&AxisPair::new(j1, j2)?)?;
    let gyro = MethodSpec::GyroOnly.weights(&NoiseModel::REFERENCE)?;
    println!(
        "gyro-only cost at (j1, j2) {:.9e}, at (j1, -j2) {:.9e}",
        cost(&x, data, &gyro)?,
        cost(&x.with_flipped_j2(), data, &gyro)?
    );

    for method in [MethodSpec::GyroOnly, MethodSpec::CombinedWeighted] {
        let weights = method.weights(&NoiseModel::REFERENCE)?;
        let mut correct = 0;
        for run in 0..100 {
            let x0 = random_initialization_stream(99, run);
            let r = estimate_axes(data, &weights, &SolverConfig::default(), x0)?;
            let axes = resolve_sign(&r.axes, &j1);
            if axes.j2.dot(&j2) > 0.0 {
                correct += 1;
            }
        }
        println!("{:<18} correct pairing in {correct}/100 runs", method.name());
    }
    Ok(())
}
