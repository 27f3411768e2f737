//! MAD/SAD of the four weighting methods on all nine synthetic scenarios.
//!
//! ```bash
//! cargo run --release --example method_comparison [segments]
//! ```

use hinge_axis::evaluation::{run_evaluation, EvaluationConfig, MethodSpec, Reference};
use hinge_axis::simulator::{simulate, AxisMode, HingeScenario, SpeedProfileKind};
use hinge_axis::NoiseModel;

fn main() -> hinge_axis::Result<()> {
    let segments: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);

    print!("{:<12} {:<6}", "axis", "speed");
    for m in MethodSpec::ALL {
        print!(" | {:^21}", m.name());
    }
    println!();
    for mode in AxisMode::ALL {
        for speed in SpeedProfileKind::MOVING {
            let scenario = HingeScenario::new(mode, speed, 120.0)
                .with_noise(NoiseModel::REFERENCE)
                .with_seed(2024);
            let (recording, truth) = simulate(&scenario)?;
            let (j1, j2) = truth.axes();
            let config = EvaluationConfig {
                segments,
                seed: 5,
                ..Default::default()
            };
            let report = run_evaluation(&recording, &Reference::new(j1, Some(j2))?, &config)?;
            print!("{:<12} {:<6}", mode.name(), speed.name());
            for m in &report.methods {
                print!(" | {:>5.1} {:>4.1} {:>5.1} {:>4.1}", m.j1.mad, m.j1.sad, m.j2.mad, m.j2.sad);
            }
            println!();
        }
    }
    println!("\ncolumns per method: MAD j1, SAD j1, MAD j2, SAD j2 (deg)");
    Ok(())
}
