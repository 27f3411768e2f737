//! Segment-wise comparison of weighting strategies.
//!
//! A recording is cut into `M` evenly spaced windows of `N` samples. Every
//! window gets one uniformly random initial estimate, shared by all compared
//! methods, and one Gauss-Newton solve per method. Estimates are sign-resolved
//! against a reference `j1` (both axes flipped together) and summarized by
//! the angular deviation between estimate pairs (MAD/SAD) and by the angular
//! error against the reference axes.
//!
//! All angles in this module are degrees.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{checked_unit, AxisPair, Vec3};
use crate::recording::RecordingPair;
use crate::residuals::{AccWeighting, NoiseModel, ResidualWeights, SamplePair};
use crate::solver::{estimate_axes, random_initialization_stream, SolverConfig, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    GyroOnly,
    AccOnly,
    CombinedUnweighted,
    CombinedWeighted,
}

impl MethodSpec {
    pub const ALL: [MethodSpec; 4] = [
        MethodSpec::GyroOnly,
        MethodSpec::AccOnly,
        MethodSpec::CombinedUnweighted,
        MethodSpec::CombinedWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodSpec::GyroOnly => "gyro_only",
            MethodSpec::AccOnly => "acc_only",
            MethodSpec::CombinedUnweighted => "combined_unweighted",
            MethodSpec::CombinedWeighted => "combined_weighted",
        }
    }

    /// Residual weights of the method; only the weighted method uses `noise`.
    pub fn weights(self, noise: &NoiseModel) -> Result<ResidualWeights> {
        Ok(match self {
            MethodSpec::GyroOnly => ResidualWeights::new(1.0, AccWeighting::Constant(0.0)),
            MethodSpec::AccOnly => ResidualWeights::new(0.0, AccWeighting::Constant(1.0)),
            MethodSpec::CombinedUnweighted => ResidualWeights::new(1.0, AccWeighting::Constant(1.0)),
            MethodSpec::CombinedWeighted => ResidualWeights::weighted(noise)?,
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodSpec::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method {s:?}, expected one of gyro_only, acc_only, combined_unweighted, combined_weighted"
                ))
            })
    }
}

/// Angle between two unit axes, in degrees.
pub fn angular_deviation(ja: &Vec3, jb: &Vec3) -> Result<f64> {
    checked_unit(ja)?;
    checked_unit(jb)?;
    Ok(ad_unchecked(ja, jb))
}

// Same angle as the clamped arccos of the dot product, but exact at 0 and 180
// deg even when rounding leaves |ja.jb| a hair below 1.
fn ad_unchecked(ja: &Vec3, jb: &Vec3) -> f64 {
    ja.cross(jb).norm().atan2(ja.dot(jb)).to_degrees()
}

/// Mean and sample standard deviation of the angular deviation over all
/// unordered estimate pairs. A single pair has SAD 0.
pub fn mad_sad(estimates: &[Vec3]) -> Result<(f64, f64)> {
    if estimates.len() < 2 {
        return Err(Error::InvalidArgument(
            "MAD/SAD needs at least two estimates".into(),
        ));
    }
    for j in estimates {
        checked_unit(j)?;
    }
    let mut ads = Vec::with_capacity(estimates.len() * (estimates.len() - 1) / 2);
    for (i, a) in estimates.iter().enumerate() {
        for b in &estimates[i + 1..] {
            ads.push(ad_unchecked(a, b));
        }
    }
    Ok(mean_std(&ads))
}

/// Mean and sample standard deviation; the deviation of one value is 0.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Flips both axes together when that brings `j1` closer to the reference.
pub fn resolve_sign(est: &AxisPair, reference_j1: &Vec3) -> AxisPair {
    if est.j1.dot(reference_j1) < 0.0 {
        est.negated()
    } else {
        *est
    }
}

/// Start indices of `m` windows of `n` samples spread evenly over `len` samples.
pub fn segment_starts(len: usize, m: usize, n: usize) -> Result<Vec<usize>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("segment count and window must be positive".into()));
    }
    if len < n {
        return Err(Error::InvalidArgument(format!(
            "recording has {len} samples, shorter than the window of {n}"
        )));
    }
    let span = len - n;
    if m == 1 {
        return Ok(vec![0]);
    }
    if span < (m - 1) * n {
        log::warn!("{m} windows of {n} samples overlap in a recording of {len} samples");
    }
    Ok((0..m).map(|i| i * span / (m - 1)).collect())
}

/// `m` windows of `n` consecutive samples, evenly spaced over the recording.
pub fn segment_dataset(recording: &RecordingPair, m: usize, n: usize) -> Result<Vec<&[SamplePair]>> {
    Ok(segment_starts(recording.len(), m, n)?
        .into_iter()
        .map(|s| &recording.samples[s..s + n])
        .collect())
}

/// Axes the estimates are compared with. `j2` is optional for real data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub j1: Vec3,
    pub j2: Option<Vec3>,
}

impl Reference {
    pub fn new(j1: Vec3, j2: Option<Vec3>) -> Result<Self> {
        Ok(Self {
            j1: checked_unit(&j1)?,
            j2: j2.map(|j| checked_unit(&j)).transpose()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub methods: Vec<MethodSpec>,
    pub segments: usize,
    pub window: usize,
    /// Noise model behind the weighted method.
    pub noise: NoiseModel,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            methods: MethodSpec::ALL.to_vec(),
            segments: 100,
            window: 500,
            noise: NoiseModel::REFERENCE,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentEstimate {
    pub segment: usize,
    pub start: usize,
    /// Sign-resolved against the reference `j1`.
    pub j1: Vec3,
    pub j2: Vec3,
    pub error_j1: f64,
    pub error_j2: Option<f64>,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisStats {
    pub mad: f64,
    pub sad: f64,
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: MethodSpec,
    pub j1: AxisStats,
    pub j2: AxisStats,
    /// Segments whose `j2` lands within 90 deg of the reference after sign resolution.
    pub correct_pairings: Option<usize>,
    pub non_converged: usize,
    pub estimates: Vec<SegmentEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub segments: usize,
    pub window: usize,
    pub seed: u64,
    pub segment_starts: Vec<usize>,
    pub w0: f64,
    pub reference: Reference,
    pub methods: Vec<MethodReport>,
}

/// Runs every method on every segment and summarizes the estimates.
pub fn run_evaluation(
    recording: &RecordingPair,
    reference: &Reference,
    config: &EvaluationConfig,
) -> Result<EvaluationReport> {
    if config.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to evaluate".into()));
    }
    let starts = segment_starts(recording.len(), config.segments, config.window)?;
    let weights = config
        .methods
        .iter()
        .map(|m| m.weights(&config.noise))
        .collect::<Result<Vec<_>>>()?;
    let reference = Reference::new(reference.j1, reference.j2)?;

    // per_segment[s][m]
    let per_segment = starts
        .par_iter()
        .enumerate()
        .map(|(segment, &start)| {
            let data = &recording.samples[start..start + config.window];
            let x0 = random_initialization_stream(config.seed, segment as u64);
            weights
                .iter()
                .map(|w| {
                    let run = estimate_axes(data, w, &config.solver, x0)?;
                    let axes = resolve_sign(&run.axes, &reference.j1);
                    Ok(SegmentEstimate {
                        segment,
                        start,
                        j1: axes.j1,
                        j2: axes.j2,
                        error_j1: ad_unchecked(&axes.j1, &reference.j1),
                        error_j2: reference.j2.map(|r| ad_unchecked(&axes.j2, &r)),
                        final_cost: run.final_cost,
                        iterations: run.iterations,
                        converged: run.converged,
                        termination: run.termination,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let estimates: Vec<SegmentEstimate> = per_segment.iter().map(|s| s[k]).collect();
            summarize(method, estimates)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvaluationReport {
        segments: config.segments,
        window: config.window,
        seed: config.seed,
        segment_starts: starts,
        w0: MethodSpec::CombinedWeighted.weights(&config.noise)?.w_gyro,
        reference,
        methods,
    })
}

fn axis_stats(axes: &[Vec3], errors: Option<Vec<f64>>) -> Result<AxisStats> {
    let (mad, sad) = if axes.len() >= 2 { mad_sad(axes)? } else { (0.0, 0.0) };
    let (mean_error, std_error) = match errors {
        Some(e) => {
            let (m, s) = mean_std(&e);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    Ok(AxisStats {
        mad,
        sad,
        mean_error,
        std_error,
    })
}

fn summarize(method: MethodSpec, estimates: Vec<SegmentEstimate>) -> Result<MethodReport> {
    let j1: Vec<Vec3> = estimates.iter().map(|e| e.j1).collect();
    let j2: Vec<Vec3> = estimates.iter().map(|e| e.j2).collect();
    let err1: Vec<f64> = estimates.iter().map(|e| e.error_j1).collect();
    let err2: Option<Vec<f64>> = estimates.iter().map(|e| e.error_j2).collect();
    let non_converged = estimates.iter().filter(|e| !e.converged).count();
    if non_converged > 0 {
        log::warn!("{method}: {non_converged} segment solves did not converge");
    }
    Ok(MethodReport {
        method,
        j1: axis_stats(&j1, Some(err1))?,
        correct_pairings: err2.as_ref().map(|e| e.iter().filter(|&&d| d < 90.0).count()),
        j2: axis_stats(&j2, err2)?,
        non_converged,
        estimates,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvaluationReport {
    pub fn method(&self, method: MethodSpec) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    /// One row per method and axis.
    pub fn write_summary_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "axis",
            "mad_deg",
            "sad_deg",
            "mean_error_deg",
            "std_error_deg",
            "correct_pairings",
            "non_converged",
            "segments",
        ])
        .map_err(csv_error)?;
        for m in &self.methods {
            for (axis, s) in [("j1", &m.j1), ("j2", &m.j2)] {
                w.write_record([
                    m.method.name().to_string(),
                    axis.to_string(),
                    s.mad.to_string(),
                    s.sad.to_string(),
                    opt(s.mean_error),
                    opt(s.std_error),
                    m.correct_pairings.map(|c| c.to_string()).unwrap_or_default(),
                    m.non_converged.to_string(),
                    m.estimates.len().to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per method and segment with the sign-resolved estimates and errors.
    pub fn write_segments_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method", "segment", "start", "j1_x", "j1_y", "j1_z", "j2_x", "j2_y", "j2_z",
            "error_j1_deg", "error_j2_deg", "final_cost", "iterations", "converged",
        ])
        .map_err(csv_error)?;
        for m in &self.methods {
            for e in &m.estimates {
                w.write_record([
                    m.method.name().to_string(),
                    e.segment.to_string(),
                    e.start.to_string(),
                    e.j1.x.to_string(),
                    e.j1.y.to_string(),
                    e.j1.z.to_string(),
                    e.j2.x.to_string(),
                    e.j2.y.to_string(),
                    e.j2.z.to_string(),
                    e.error_j1.to_string(),
                    opt(e.error_j2),
                    e.final_cost.to_string(),
                    e.iterations.to_string(),
                    e.converged.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table, two decimals.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<20} {:>8} {:>8} {:>8} {:>8} {:>9}\n",
            "method", "MAD j1", "SAD j1", "MAD j2", "SAD j2", "pairing"
        );
        for m in &self.methods {
            let pairing = m
                .correct_pairings
                .map(|c| format!("{c}/{}", m.estimates.len()))
                .unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<20} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>9}\n",
                m.method.name(),
                m.j1.mad,
                m.j1.sad,
                m.j2.mad,
                m.j2.sad,
                pairing
            ));
        }
        s
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
