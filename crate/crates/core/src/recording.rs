//! Synchronized two-sensor recordings and their CSV representation.
//!
//! One row per time step, header required:
//!
//! ```text
//! t,gyr1_x,gyr1_y,gyr1_z,acc1_x,acc1_y,acc1_z,gyr2_x,gyr2_y,gyr2_z,acc2_x,acc2_y,acc2_z
//! ```
//!
//! Units are s, rad/s and m/s^2. Values are written in shortest round-trip
//! form, so reading a written file reproduces every sample bit for bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Vec3;
use crate::residuals::SamplePair;

pub const CSV_HEADER: [&str; 13] = [
    "t", "gyr1_x", "gyr1_y", "gyr1_z", "acc1_x", "acc1_y", "acc1_z", "gyr2_x", "gyr2_y", "gyr2_z",
    "acc2_x", "acc2_y", "acc2_z",
];

/// Relative deviation of a sampling interval from the median before a warning is logged.
const JITTER_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingPair {
    pub samples: Vec<SamplePair>,
    /// Hz
    pub sample_rate: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl RecordingPair {
    /// Validates timestamps and infers the sample rate from the median interval.
    pub fn from_samples(samples: Vec<SamplePair>) -> Result<Self> {
        let sample_rate = check_timestamps(&samples)?;
        Ok(Self {
            samples,
            sample_rate,
            metadata: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn time_range(&self, t0: f64, t1: f64) -> Vec<SamplePair> {
        self.samples
            .iter()
            .filter(|s| s.t >= t0 && s.t <= t1)
            .copied()
            .collect()
    }

    /// A copy with every signal replaced by its centered moving average over
    /// `window` samples (shrinking at the ends). `window <= 1` is a no-op.
    pub fn moving_average(&self, window: usize) -> Self {
        if window <= 1 {
            return self.clone();
        }
        let n = self.samples.len();
        let half = window / 2;
        let samples = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(half);
                let hi = (k + window - half).min(n);
                let span = &self.samples[lo..hi];
                let avg = |f: fn(&SamplePair) -> Vec3| {
                    span.iter().map(f).sum::<Vec3>() / span.len() as f64
                };
                SamplePair {
                    t: self.samples[k].t,
                    gyr1: avg(|s| s.gyr1),
                    acc1: avg(|s| s.acc1),
                    gyr2: avg(|s| s.gyr2),
                    acc2: avg(|s| s.acc2),
                }
            })
            .collect();
        Self {
            samples,
            sample_rate: self.sample_rate,
            metadata: self.metadata.clone(),
        }
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv_from(File::open(path)?)
    }

    pub fn read_csv_from(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }

        let mut samples = Vec::new();
        let mut lines = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != CSV_HEADER.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", CSV_HEADER.len(), record.len()),
                });
            }
            let mut v = [0.0; 13];
            for (i, field) in record.iter().enumerate() {
                v[i] = field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("column {} is not a finite number: {field:?}", CSV_HEADER[i]),
                    })?;
            }
            samples.push(SamplePair {
                t: v[0],
                gyr1: Vec3::new(v[1], v[2], v[3]),
                acc1: Vec3::new(v[4], v[5], v[6]),
                gyr2: Vec3::new(v[7], v[8], v[9]),
                acc2: Vec3::new(v[10], v[11], v[12]),
            });
            lines.push(line);
        }
        if let Some(k) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::Parse {
                line: lines[k + 1],
                message: "timestamps must be strictly increasing".into(),
            });
        }
        Self::from_samples(samples)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{}", CSV_HEADER.join(","))?;
        for s in &self.samples {
            write!(out, "{}", s.t)?;
            for v in [s.gyr1, s.acc1, s.gyr2, s.acc2] {
                write!(out, ",{},{},{}", v.x, v.y, v.z)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Checks that time strictly increases and returns the rate implied by the median interval.
fn check_timestamps(samples: &[SamplePair]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "a recording needs at least two samples".into(),
        ));
    }
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    if let Some(k) = dts.iter().position(|&dt| dt.is_nan() || dt <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "timestamps must be strictly increasing (sample {})",
            k + 1
        )));
    }
    let jittery = {
        let mut sorted = dts.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let worst = dts
            .iter()
            .map(|dt| ((dt - median) / median).abs())
            .fold(0.0, f64::max);
        dts = sorted;
        worst > JITTER_TOLERANCE
    };
    if jittery {
        log::warn!("sampling intervals deviate from the median by more than 1%");
    }
    Ok(1.0 / dts[dts.len() / 2])
}
