//! Estimate the joint axis from one 5 s window of noisy data.
//!
//! ```bash
//! cargo run --example estimate_axis
//! ```

use hinge_axis::evaluation::angular_deviation;
use hinge_axis::simulator::{simulate, AxisMode, HingeScenario, SpeedProfileKind};
use hinge_axis::solver::estimate_axes_multistart;
use hinge_axis::{NoiseModel, ResidualWeights, SolverConfig};

fn main() -> hinge_axis::Result<()> {
    let scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 5.0)
        .with_noise(NoiseModel::REFERENCE)
        .with_seed(1);
    let (recording, truth) = simulate(&scenario)?;
    let (j1, j2) = truth.axes();

    let weights = ResidualWeights::weighted(&NoiseModel::REFERENCE)?;
    let result = estimate_axes_multistart(&recording.samples, &weights, &SolverConfig::default(), 8, 42)?;

    for entry in &result.trace {
        println!("iter {:>2}  cost {:.6e}  step {:.2e}", entry.iteration, entry.cost, entry.step_norm);
    }
    println!("termination: {:?}", result.termination);

    // the estimate is only defined up to a joint sign flip
    let est = if result.axes.j1.dot(&j1) < 0.0 { result.axes.negated() } else { result.axes };
    println!("j1 = {:?}, error {:.3} deg", est.j1.as_slice(), angular_deviation(&est.j1, &j1)?);
    println!("j2 = {:?}, error {:.3} deg", est.j2.as_slice(), angular_deviation(&est.j2, &j2)?);
    Ok(())
}
