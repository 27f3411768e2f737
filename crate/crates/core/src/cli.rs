//! Command-line front end: `simulate`, `calibrate`, `estimate`, `evaluate`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
//! error, 3 estimation did not converge.
//!
//! Every command accepts `--config FILE` (JSON); flags override the file.
//! Outputs are only written after all computation has finished.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{apply_calibration, calibrate_stationary, StationaryCalibration, STANDARD_GRAVITY};
use crate::error::Error;
use crate::evaluation::{run_evaluation, EvaluationConfig, MethodSpec, Reference};
use crate::kinematics::{axis_to_spherical, AxisPair, Vec3};
use crate::recording::RecordingPair;
use crate::residuals::{NoiseModel, ResidualWeights};
use crate::simulator::{simulate, AxisMode, GroundTruthFile, HingeScenario, SpeedProfileKind};
use crate::solver::{estimate_axes_multistart, EstimationResult, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Parse { .. }
            | Error::NotStationary { .. }
            | Error::ImplausibleStationary { .. }
            | Error::Io(_) => EXIT_DATA,
            Error::InvalidArgument(_) | Error::Config(_) | Error::NotUnit { .. } | Error::Json(_) => EXIT_USAGE,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn with_path<T>(path: &Path, code: i32, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError {
        code: if matches!(e, Error::Parse { .. }) { EXIT_DATA } else { code },
        message: format!("{}: {e}", path.display()),
    })
}

#[derive(Debug, Parser)]
#[command(name = "hinge-axis", version, about = "Hinge joint axis estimation from two IMUs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording and its ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Estimate gyro bias, accelerometer gain and noise from a stationary range.
    Calibrate(CalibrateArgs),
    /// Estimate the joint axis in both sensor frames.
    Estimate(EstimateArgs),
    /// Compare all four weighting methods on evenly spaced segments.
    Evaluate(EvaluateArgs),
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected t0:t1")?;
    let t0: f64 = a.trim().parse().map_err(|_| format!("bad start time {a:?}"))?;
    let t1: f64 = b.trim().parse().map_err(|_| format!("bad end time {b:?}"))?;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err("range must satisfy t0 < t1".into());
    }
    Ok((t0, t1))
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        &[x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err("expected three comma-separated numbers".into()),
    }
}

fn parse_method(s: &str) -> Result<MethodSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["free", "vertical", "horizontal"])]
    pub axis_mode: Option<String>,
    #[arg(long, value_parser = ["fast", "slow", "mixed", "stationary"])]
    pub speed: Option<String>,
    /// s
    #[arg(long)]
    pub duration: Option<f64>,
    /// s of rest at the start, usable for calibration.
    #[arg(long)]
    pub stationary_preamble: Option<f64>,
    /// Add noise at the reference sensor levels.
    #[arg(long, conflicts_with = "noise_free")]
    pub noisy: bool,
    #[arg(long)]
    pub noise_free: bool,
    /// Recording CSV; the sidecar is written next to it as `<stem>.truth.json`.
    #[arg(long)]
    pub output: PathBuf,
}

/// Settings shared by `calibrate`, `estimate` and `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub noise: NoiseSource,
    pub method: MethodSpec,
    pub segments: usize,
    pub window: usize,
    pub seed: u64,
    pub n_starts: usize,
    pub stationary_range: Option<(f64, f64)>,
    /// Moving-average window in samples; 0 or 1 disables smoothing.
    pub smoothing: usize,
    /// m/s^2
    pub gravity: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            noise: NoiseSource::Model(NoiseModel::REFERENCE),
            method: MethodSpec::CombinedWeighted,
            segments: 100,
            window: 500,
            seed: 0,
            n_starts: 8,
            stationary_range: None,
            smoothing: 0,
            gravity: STANDARD_GRAVITY,
        }
    }
}

/// Noise model behind `w0`: explicit sigmas or the `"from-stationary"` keyword.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSource {
    Model(NoiseModel),
    Keyword(NoiseKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKeyword {
    #[serde(rename = "from-stationary")]
    FromStationary,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
            }
        };
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        if let NoiseSource::Model(m) = &self.noise {
            m.validate()?;
        }
        if self.n_starts == 0 || self.segments == 0 || self.window < 4 {
            return Err(CliError::usage("n_starts and segments must be positive and window at least 4"));
        }
        if !self.gravity.is_finite() || self.gravity <= 0.0 {
            return Err(CliError::usage("gravity must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stationary time range `t0:t1` in seconds.
    #[arg(long, value_parser = parse_range)]
    pub stationary_range: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Recording CSV.
    pub recording: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Calibration JSON.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Recording CSV.
    pub recording: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<MethodSpec>,
    /// Calibration JSON from `calibrate`.
    #[arg(long, conflicts_with = "stationary_range")]
    pub calibration: Option<PathBuf>,
    /// Number of random starts.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Moving-average window in samples (off by default).
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Result JSON.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Recording CSV.
    pub recording: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Ground-truth sidecar from `simulate`.
    #[arg(long, conflicts_with = "reference")]
    pub ground_truth: Option<PathBuf>,
    /// Reference j1 as `x,y,z`.
    #[arg(long, value_parser = parse_vec3, required_unless_present = "ground_truth")]
    pub reference: Option<Vec3>,
    /// Reference j2 as `x,y,z`; enables pairing statistics.
    #[arg(long, value_parser = parse_vec3, requires = "reference")]
    pub reference_j2: Option<Vec3>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Number of segments M.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Samples per segment N.
    #[arg(long)]
    pub window: Option<usize>,
    /// Output directory for report.json, report.csv and segments.csv.
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, code: i32) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError {
        code,
        message: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError {
        code,
        message: format!("{}: {e}", path.display()),
    })
}

/// `<dir>/<stem>.truth.json` next to a recording path.
pub fn sidecar_path(recording: &Path) -> PathBuf {
    let stem = recording.file_stem().unwrap_or_default().to_string_lossy();
    recording.with_file_name(format!("{stem}.truth.json"))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<i32> {
    let mut scenario: HingeScenario = match &args.config {
        Some(p) => read_json(p, EXIT_USAGE)?,
        None => HingeScenario::default(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(mode) = &args.axis_mode {
        scenario.axis_mode = match mode.as_str() {
            "vertical" => AxisMode::Vertical,
            "horizontal" => AxisMode::Horizontal,
            _ => AxisMode::Free,
        };
    }
    if let Some(speed) = &args.speed {
        scenario.speed_profile = match speed.as_str() {
            "slow" => SpeedProfileKind::Slow,
            "mixed" => SpeedProfileKind::Mixed,
            "stationary" => SpeedProfileKind::Stationary,
            _ => SpeedProfileKind::Fast,
        };
    }
    if let Some(d) = args.duration {
        scenario.duration = d;
    }
    if let Some(p) = args.stationary_preamble {
        scenario.stationary_preamble = p;
    }
    if args.noisy {
        scenario.noise = Some(NoiseModel::REFERENCE);
    }
    if args.noise_free {
        scenario.noise = None;
    }

    let (recording, truth) = simulate(&scenario)?;
    recording
        .write_csv(&args.output)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", args.output.display())))?;
    let sidecar = sidecar_path(&args.output);
    write_json(&sidecar, &truth.to_file())?;

    let s = truth.summary();
    println!(
        "simulated {} samples ({:.2} s at {} Hz), axis mode {}, speed {}",
        s.samples,
        s.duration,
        scenario.sample_rate,
        scenario.axis_mode.name(),
        scenario.speed_profile.name()
    );
    println!(
        "joint rate: max {:.2} rad/s, mean {:.2}, sd {:.2}; max sensor rate {:.2} rad/s",
        s.max_joint_rate, s.mean_joint_rate, s.std_joint_rate, s.max_sensor_rate
    );
    println!("wrote {} and {}", args.output.display(), sidecar.display());
    Ok(EXIT_OK)
}

fn load_config(common: &CommonArgs) -> CliResult<RunConfig> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(range) = common.stationary_range {
        config.stationary_range = Some(range);
    }
    config.validate()?;
    Ok(config)
}

fn read_recording(path: &Path) -> CliResult<RecordingPair> {
    with_path(path, EXIT_DATA, RecordingPair::read_csv(path))
}

fn stationary_calibration(recording: &RecordingPair, range: (f64, f64), g: f64) -> CliResult<StationaryCalibration> {
    let samples = recording.time_range(range.0, range.1);
    let cal = calibrate_stationary(&samples, g).map_err(|e| match e {
        // too few samples in the range is a data problem here
        Error::InvalidArgument(m) => CliError {
            code: EXIT_DATA,
            message: format!("stationary range {}:{}: {m}", range.0, range.1),
        },
        other => other.into(),
    })?;
    Ok(cal)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub stationary_range: (f64, f64),
    pub samples: usize,
    #[serde(flatten)]
    pub calibration: StationaryCalibration,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<i32> {
    let config = load_config(&args.common)?;
    let range = config
        .stationary_range
        .ok_or_else(|| CliError::usage("calibrate needs --stationary-range t0:t1"))?;
    let recording = read_recording(&args.recording)?;
    let cal = stationary_calibration(&recording, range, config.gravity)?;
    let file = CalibrationFile {
        stationary_range: range,
        samples: recording.time_range(range.0, range.1).len(),
        calibration: cal,
    };
    write_json(&args.output, &file)?;
    for (i, s) in [(1, &cal.sensor1), (2, &cal.sensor2)] {
        println!(
            "sensor {i}: gyro bias [{:.5}, {:.5}, {:.5}] rad/s, acc gain {:.5}, sigma gyro {:.5}, sigma acc {:.5}",
            s.gyro_bias.x, s.gyro_bias.y, s.gyro_bias.z, s.acc_gain, s.sigma_gyro, s.sigma_acc
        );
    }
    println!("w0 = {:.4}", cal.w0);
    Ok(EXIT_OK)
}

/// Applies calibration and picks the noise model; returns the data to estimate from.
fn prepare(
    recording: RecordingPair,
    calibration: Option<&Path>,
    config: &RunConfig,
) -> CliResult<(RecordingPair, NoiseModel, Option<StationaryCalibration>)> {
    let cal = match (calibration, config.stationary_range) {
        (Some(path), _) => {
            let file: CalibrationFile = read_json(path, EXIT_USAGE)?;
            file.calibration.sensor1.validate()?;
            file.calibration.sensor2.validate()?;
            Some((file.calibration, None))
        }
        (None, Some(range)) => Some((stationary_calibration(&recording, range, config.gravity)?, Some(range))),
        (None, None) => None,
    };
    match cal {
        Some((cal, range)) => {
            let mut data = apply_calibration(&recording, &cal.sensor1, &cal.sensor2);
            if let Some((t0, t1)) = range {
                data.samples.retain(|s| s.t < t0 || s.t > t1);
            }
            Ok((data, cal.noise, Some(cal)))
        }
        None => match config.noise {
            NoiseSource::Model(m) => Ok((recording, m, None)),
            NoiseSource::Keyword(NoiseKeyword::FromStationary) => Err(CliError::usage(
                "noise is \"from-stationary\" but no --stationary-range or --calibration was given",
            )),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalAxes {
    pub theta1: f64,
    pub phi1: f64,
    pub theta2: f64,
    pub phi2: f64,
}

/// Contents of the `estimate` result JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub method: MethodSpec,
    pub weights: ResidualWeights,
    pub noise: NoiseModel,
    pub samples: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub j1: Vec3,
    pub j2: Vec3,
    /// rad
    pub spherical: SphericalAxes,
    pub calibration: Option<StationaryCalibration>,
    pub result: EstimationResult,
}

fn spherical(axes: &AxisPair) -> crate::Result<SphericalAxes> {
    let (theta1, phi1) = axis_to_spherical(&axes.j1)?;
    let (theta2, phi2) = axis_to_spherical(&axes.j2)?;
    Ok(SphericalAxes {
        theta1,
        phi1,
        theta2,
        phi2,
    })
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<i32> {
    let mut config = load_config(&args.common)?;
    if let Some(m) = args.method {
        config.method = m;
    }
    if let Some(n) = args.starts {
        config.n_starts = n;
    }
    if let Some(w) = args.smooth {
        config.smoothing = w;
    }
    config.validate()?;

    let recording = read_recording(&args.recording)?;
    let (data, noise, calibration) = prepare(recording, args.calibration.as_deref(), &config)?;
    let data = data.moving_average(config.smoothing);
    let weights = config.method.weights(&noise)?;
    let result = estimate_axes_multistart(&data.samples, &weights, &config.solver, config.n_starts, config.seed)?;

    let output = EstimateOutput {
        method: config.method,
        weights,
        noise,
        samples: data.len(),
        n_starts: config.n_starts,
        seed: config.seed,
        j1: result.axes.j1,
        j2: result.axes.j2,
        spherical: spherical(&result.axes)?,
        calibration,
        result,
    };
    write_json(&args.output, &output)?;

    let r = &output.result;
    println!(
        "j1 = [{:.5}, {:.5}, {:.5}]  j2 = [{:.5}, {:.5}, {:.5}]",
        output.j1.x, output.j1.y, output.j1.z, output.j2.x, output.j2.y, output.j2.z
    );
    println!(
        "method {}, cost {:.6e}, {} iterations, {:?}",
        output.method, r.final_cost, r.iterations, r.termination
    );
    if !r.converged {
        eprintln!("estimation did not converge ({:?})", r.termination);
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<i32> {
    let config = load_config(&args.common)?;
    let reference = match (&args.ground_truth, args.reference) {
        (Some(path), _) => {
            let truth: GroundTruthFile = read_json(path, EXIT_DATA)?;
            Reference::new(truth.j1, Some(truth.j2))
        }
        (None, Some(j1)) => Reference::new(j1.normalize(), args.reference_j2.map(|j| j.normalize())),
        (None, None) => return Err(CliError::usage("evaluate needs --ground-truth or --reference")),
    }?;

    let recording = read_recording(&args.recording)?;
    let (data, noise, _) = prepare(recording, args.calibration.as_deref(), &config)?;
    let data = data.moving_average(config.smoothing);
    let eval = EvaluationConfig {
        methods: MethodSpec::ALL.to_vec(),
        segments: args.segments.unwrap_or(config.segments),
        window: args.window.unwrap_or(config.window),
        noise,
        solver: config.solver,
        seed: config.seed,
    };
    let report = run_evaluation(&data, &reference, &eval).map_err(|e| match e {
        Error::InvalidArgument(m) => CliError {
            code: EXIT_DATA,
            message: m,
        },
        other => other.into(),
    })?;

    let dir = &args.output;
    std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    write_json(&dir.join("report.json"), &report)?;
    let mut summary = Vec::new();
    report.write_summary_csv(&mut summary)?;
    let mut segments = Vec::new();
    report.write_segments_csv(&mut segments)?;
    for (name, bytes) in [("report.csv", summary), ("segments.csv", segments)] {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    }

    println!("{} segments of {} samples, w0 = {:.4}", report.segments, report.window, report.w0);
    print!("{}", report.table());
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}
