//! The command-line workflow driven in-process:
//! simulate, calibrate, estimate, evaluate.
//!
//! ```bash
//! cargo run --release --example cli_pipeline
//! ```
//!
//! The same steps from a shell:
//!
//! ```bash
//! hinge-axis simulate --noisy --stationary-preamble 10 --duration 70 --seed 1 --output run.csv
//! hinge-axis calibrate run.csv --stationary-range 0:10 --output cal.json
//! hinge-axis estimate run.csv --calibration cal.json --output result.json
//! hinge-axis evaluate run.csv --ground-truth run.truth.json --stationary-range 0:10 --segments 50 --output report
//! ```

use hinge_axis::cli::run;

fn main() {
    let dir = std::env::temp_dir().join("hinge-axis-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();

    let steps: Vec<Vec<String>> = vec![
        vec!["simulate", "--noisy", "--stationary-preamble", "10", "--duration", "70", "--seed", "1", "--output", &p("run.csv")],
        vec!["calibrate", &p("run.csv"), "--stationary-range", "0:10", "--output", &p("cal.json")],
        vec!["estimate", &p("run.csv"), "--calibration", &p("cal.json"), "--output", &p("result.json")],
        vec!["evaluate", &p("run.csv"), "--ground-truth", &p("run.truth.json"), "--stationary-range", "0:10", "--segments", "50", "--output", &p("report")],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();

    for args in steps {
        println!("$ hinge-axis {}", args.join(" "));
        let code = run(std::iter::once("hinge-axis".to_string()).chain(args));
        println!("exit {code}\n");
        if code != 0 {
            std::process::exit(code);
        }
    }
}
