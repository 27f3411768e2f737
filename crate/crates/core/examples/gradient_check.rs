//! Compare analytic residual gradients against central differences.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use hinge_axis::residuals::{acc_residual, acc_residual_gradient, gyro_residual, gyro_residual_gradient};
use hinge_axis::{AxisParams, SamplePair, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut v = |s: f64| Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
    let sample = SamplePair { t: 0.0, gyr1: v(3.0), acc1: v(12.0), gyr2: v(3.0), acc2: v(12.0) };
    let x = AxisParams::new(0.4, -1.1, -0.7, 2.3);
    let h = 1e-6;

    let fd = |f: &dyn Fn(&AxisParams) -> f64| -> [f64; 4] {
        std::array::from_fn(|i| {
            let mut plus = x.to_array();
            let mut minus = x.to_array();
            plus[i] += h;
            minus[i] -= h;
            (f(&AxisParams::from_array(plus)) - f(&AxisParams::from_array(minus))) / (2.0 * h)
        })
    };

    let gyro = gyro_residual_gradient(&sample, &x, 1.0);
    let gyro_fd = fd(&|p| gyro_residual(&sample, p, 1.0));
    let acc = acc_residual_gradient(&sample, &x, 1.0);
    let acc_fd = fd(&|p| acc_residual(&sample, p, 1.0));
    for (name, a, n) in [("gyro", gyro, gyro_fd), ("acc", acc, acc_fd)] {
        println!("{name}");
        for i in 0..4 {
            println!("  d/dx{i}: analytic {:+.9} numeric {:+.9}", a[i], n[i]);
        }
    }
}
