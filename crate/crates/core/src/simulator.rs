//! Synthetic two-segment hinge recordings with exact ground truth.
//!
//! All kinematics are closed form. Each segment orientation is a chain of
//! elementary rotations about fixed local axes whose angles are sums of
//! sinusoids, so angular velocity and angular acceleration follow
//! analytically from the chain rule. Nothing is integrated numerically.
//!
//! Frames:
//!
//! * the body frame of segment 1 has the joint axis along its `z` axis and
//!   global orientation `B(t)`;
//! * segment 2 is segment 1 rotated by the joint angle `q(t)` about that axis;
//! * sensor `i` is mounted with a fixed rotation `M_i` that maps its own axis
//!   coordinates `j_i` onto body `z`, so `R_1 = B M_1` and `R_2 = B Rz(q) M_2`
//!   and `R_1 j_1 = R_2 j_2` holds at every instant.
//!
//! `r_i` is the position of sensor `i` relative to the joint center, in the
//! sensor frame, which makes the accelerometer model
//! `a_i = R_i^T (p0'' - g) + K(w_i, dw_i) r_i`.
//!
//! Speed profiles are realized by warping time: the joint angle is a
//! function of a warped time `tau(t)` whose rate is 1 for fast motion, a
//! small constant for slow motion and 0 while stationary, with quintic
//! blends between regimes. The base orientation and the joint-center
//! translation run on a second warp that is 0 while at rest and 1 otherwise,
//! so they keep their pace whatever the joint does.
//!
//! The base tumbles slowly while the joint center is shaken hard. Tumbling
//! rate times joint rate sets the size of the rotational terms `j.K r`, and
//! translation keeps the accelerometer directions varying, so the axis stays
//! well observable while the acceleration constraint stays nearly exact.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::STANDARD_GRAVITY;
use crate::error::{Error, Result};
use crate::kinematics::{checked_unit, rotational_acc_matrix, Mat3, Vec3};
use crate::recording::RecordingPair;
use crate::residuals::{NoiseModel, SamplePair};

/// Warped-time rate of the slow profile relative to the fast one.
pub const SLOW_SPEED_FACTOR: f64 = 0.15;
/// Width (s) of the blend between two speed regimes.
pub const REGIME_TRANSITION: f64 = 1.0;
/// Range (s) of the mixed-profile regime lengths.
pub const MIXED_INTERVAL: (f64, f64) = (5.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    /// The whole joint tumbles in 3D.
    Free,
    /// Joint axis stays vertical, segments move in a horizontal plane.
    Vertical,
    /// Joint axis stays horizontal, segments move in a vertical plane.
    Horizontal,
}

impl AxisMode {
    pub const ALL: [AxisMode; 3] = [AxisMode::Free, AxisMode::Vertical, AxisMode::Horizontal];

    pub fn name(self) -> &'static str {
        match self {
            AxisMode::Free => "free",
            AxisMode::Vertical => "vertical",
            AxisMode::Horizontal => "horizontal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedProfileKind {
    Fast,
    Slow,
    /// Alternates fast and slow regimes of 5-10 s.
    Mixed,
    /// No motion at all.
    Stationary,
}

impl SpeedProfileKind {
    pub const MOVING: [SpeedProfileKind; 3] = [
        SpeedProfileKind::Fast,
        SpeedProfileKind::Slow,
        SpeedProfileKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpeedProfileKind::Fast => "fast",
            SpeedProfileKind::Slow => "slow",
            SpeedProfileKind::Mixed => "mixed",
            SpeedProfileKind::Stationary => "stationary",
        }
    }
}

/// Everything needed to generate one synthetic recording.
///
/// Missing fields take the values of [`HingeScenario::default`], a noise-free
/// 60 s fast free-axis recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HingeScenario {
    pub j1_true: Vec3,
    pub j2_true: Vec3,
    /// m, sensor 1 relative to the joint center, sensor-1 frame
    pub r1: Vec3,
    /// m, sensor 2 relative to the joint center, sensor-2 frame
    pub r2: Vec3,
    pub axis_mode: AxisMode,
    pub speed_profile: SpeedProfileKind,
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// m/s^2, global frame
    pub gravity: Vec3,
    /// `None` produces noise-free measurements.
    pub noise: Option<NoiseModel>,
    pub gyro_bias1: Vec3,
    pub gyro_bias2: Vec3,
    /// Raw accelerometer scale factor of sensor 1.
    pub acc_scale1: f64,
    pub acc_scale2: f64,
    /// s of rest before motion starts.
    pub stationary_preamble: f64,
    /// rad, rotation of each sensor about the joint axis within its segment
    pub mount_twist1: f64,
    pub mount_twist2: f64,
    pub translate_joint: bool,
    pub seed: u64,
}

impl Default for HingeScenario {
    fn default() -> Self {
        Self::new(AxisMode::Free, SpeedProfileKind::Fast, 60.0)
    }
}

impl HingeScenario {
    /// Noise-free scenario with default mounting.
    pub fn new(axis_mode: AxisMode, speed_profile: SpeedProfileKind, duration: f64) -> Self {
        Self {
            j1_true: Vec3::new(0.2, -0.6, 0.77).normalize(),
            j2_true: Vec3::new(-0.7, 0.1, 0.7).normalize(),
            r1: Vec3::new(0.1, 0.05, -0.02),
            r2: Vec3::new(-0.08, 0.03, 0.04),
            axis_mode,
            speed_profile,
            duration,
            sample_rate: 100.0,
            gravity: Vec3::new(0.0, 0.0, -STANDARD_GRAVITY),
            noise: None,
            gyro_bias1: Vec3::zeros(),
            gyro_bias2: Vec3::zeros(),
            acc_scale1: 1.0,
            acc_scale2: 1.0,
            stationary_preamble: 0.0,
            mount_twist1: 0.7,
            mount_twist2: -1.2,
            translate_joint: true,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        checked_unit(&self.j1_true)?;
        checked_unit(&self.j2_true)?;
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.stationary_preamble >= 0.0 && self.stationary_preamble < self.duration) {
            return Err(Error::Config("stationary_preamble must lie in [0, duration)".into()));
        }
        if !(self.acc_scale1 > 0.0 && self.acc_scale2 > 0.0) {
            return Err(Error::Config("accelerometer scales must be positive".into()));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

/// Piecewise-constant warped-time rate with smooth transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    initial_rate: f64,
    /// (boundary time, rate change)
    changes: Vec<(f64, f64)>,
}

fn smoothstep(x: f64) -> (f64, f64, f64) {
    // quintic blend h, its integral H and derivative h'
    if x <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.5 + (x - 1.0), 0.0)
    } else {
        let x2 = x * x;
        let x3 = x2 * x;
        let h = x3 * (10.0 - 15.0 * x + 6.0 * x2);
        let big_h = x2 * x2 * (2.5 - 3.0 * x + x2);
        let dh = 30.0 * x2 * (1.0 - x) * (1.0 - x);
        (h, big_h, dh)
    }
}

impl SpeedProfile {
    /// Builds the warp for `kind` over `duration` s, resting for `preamble` s first.
    pub fn new(kind: SpeedProfileKind, duration: f64, preamble: f64, seed: u64) -> Self {
        let mut changes = Vec::new();
        let start = |changes: &mut Vec<(f64, f64)>, rate: f64| {
            if preamble > 0.0 {
                changes.push((preamble + REGIME_TRANSITION / 2.0, rate));
                0.0
            } else {
                rate
            }
        };
        let initial_rate = match kind {
            SpeedProfileKind::Stationary => 0.0,
            SpeedProfileKind::Fast => start(&mut changes, 1.0),
            SpeedProfileKind::Slow => start(&mut changes, SLOW_SPEED_FACTOR),
            SpeedProfileKind::Mixed => {
                let initial = start(&mut changes, 1.0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                let mut t = preamble;
                let mut fast = true;
                loop {
                    t += rng.random_range(MIXED_INTERVAL.0..=MIXED_INTERVAL.1);
                    if t >= duration {
                        break;
                    }
                    let delta = if fast {
                        SLOW_SPEED_FACTOR - 1.0
                    } else {
                        1.0 - SLOW_SPEED_FACTOR
                    };
                    changes.push((t, delta));
                    fast = !fast;
                }
                initial
            }
        };
        Self {
            initial_rate,
            changes,
        }
    }

    /// Warped time and its first two derivatives at `t`.
    pub fn warp(&self, t: f64) -> (f64, f64, f64) {
        let mut tau = self.initial_rate * t;
        let mut rate = self.initial_rate;
        let mut acc = 0.0;
        for &(boundary, delta) in &self.changes {
            let x = (t - boundary) / REGIME_TRANSITION + 0.5;
            let (h, big_h, dh) = smoothstep(x);
            tau += delta * REGIME_TRANSITION * big_h;
            rate += delta * h;
            acc += delta * dh / REGIME_TRANSITION;
        }
        (tau, rate, acc)
    }
}

/// Sum of sinusoids `sum a sin(w tau + p)` with derivatives w.r.t. `tau`.
#[derive(Debug, Clone, Copy)]
struct Harmonics<const N: usize>([(f64, f64, f64); N]);

impl<const N: usize> Harmonics<N> {
    fn eval(&self, tau: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for &(a, w, p) in &self.0 {
            let (s, c) = (w * tau + p).sin_cos();
            out.0 += a * s;
            out.1 += a * w * c;
            out.2 -= a * w * w * s;
        }
        out
    }
}

/// Joint angle: zero at rest, peak rate 4 rad/s at unit warp rate.
const JOINT_ANGLE: Harmonics<2> = Harmonics([(0.9, PI, 0.0), (0.169_709_7, 2.2 * PI, 0.0)]);

// Slow tumbling of the whole joint: angles up to a radian, rates below 0.1 rad/s.
const FREE_BASE: [Harmonics<2>; 3] = [
    Harmonics([(1.0, 0.055, 0.4), (0.15, 0.185, 2.0)]),
    Harmonics([(0.7, 0.065, 1.1), (0.1, 0.145, 0.3)]),
    Harmonics([(0.9, 0.045, 2.0), (0.12, 0.205, 0.9)]),
];
const PLANAR_BASE: Harmonics<2> = Harmonics([(0.6, 0.25, 0.3), (0.2, 0.6, 1.0)]);
// Swing of segment 1 about the hinge axis, following the joint's speed; peak about 2 rad/s.
const FREE_SWING: Harmonics<2> = Harmonics([(1.0, 1.3, 0.3), (0.3, 3.1, 1.0)]);
// m; comparable acceleration along every axis, peaks 13-15 m/s^2
const JOINT_CENTER: [Harmonics<2>; 3] = [
    Harmonics([(0.3, 5.0, 0.0), (0.08, 9.1, 0.7)]),
    Harmonics([(0.45, 4.1, 0.5), (0.07, 10.3, 2.1)]),
    Harmonics([(0.19, 6.3, 1.2), (0.1, 7.7, 0.4)]),
];

/// Joint angle of a speed profile at time `t`, in rad.
pub fn speed_profile_angle(profile: &SpeedProfile, t: f64) -> f64 {
    JOINT_ANGLE.eval(profile.warp(t).0).0
}

/// Angle, rate and acceleration of a warped signal at real time.
fn warped(signal: (f64, f64, f64), warp: (f64, f64, f64)) -> (f64, f64, f64) {
    let (f, df, ddf) = signal;
    let (_, rate, acc) = warp;
    (f, df * rate, ddf * rate * rate + df * acc)
}

/// Orientation, angular velocity and angular acceleration of a chain of
/// elementary rotations, all in the global frame.
#[derive(Clone, Copy)]
struct ChainState {
    rotation: Mat3,
    omega: Vec3,
    omega_dot: Vec3,
}

impl ChainState {
    fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            omega: Vec3::zeros(),
            omega_dot: Vec3::zeros(),
        }
    }

    /// Appends a rotation about the local `axis` with angle, rate and acceleration `q`.
    fn then(self, axis: Vec3, q: (f64, f64, f64)) -> Self {
        let global_axis = self.rotation * axis;
        let omega_dot = self.omega_dot + global_axis * q.2 + self.omega.cross(&(global_axis * q.1));
        let omega = self.omega + global_axis * q.1;
        let rotation = self.rotation * Rotation3::from_axis_angle(&Unit::new_unchecked(axis), q.0).into_inner();
        Self {
            rotation,
            omega,
            omega_dot,
        }
    }
}

/// Noise-free kinematic state of both sensors at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    /// Sensor-to-global rotations.
    pub rot1: Mat3,
    pub rot2: Mat3,
    /// Angular velocities in the sensor frames, rad/s.
    pub omega1: Vec3,
    pub omega2: Vec3,
    /// Angular accelerations in the sensor frames, rad/s^2.
    pub omega_dot1: Vec3,
    pub omega_dot2: Vec3,
    /// Specific force at each sensor, sensor frame, m/s^2.
    pub acc1: Vec3,
    pub acc2: Vec3,
    pub joint_angle: f64,
    pub joint_rate: f64,
}

/// Deterministic motion of a scenario.
pub struct Motion {
    scenario: HingeScenario,
    profile: SpeedProfile,
    activity: SpeedProfile,
    mount1: Mat3,
    mount2: Mat3,
}

/// Rotation taking sensor coordinates to body coordinates with `j` mapped onto body `z`.
fn mounting(j: &Vec3, twist: f64) -> Mat3 {
    let align = Rotation3::rotation_between(j, &Vec3::z())
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), PI));
    (Rotation3::from_axis_angle(&Vec3::z_axis(), twist) * align).into_inner()
}

impl Motion {
    pub fn new(scenario: &HingeScenario) -> Result<Self> {
        scenario.validate()?;
        let j1 = checked_unit(&scenario.j1_true)?;
        let j2 = checked_unit(&scenario.j2_true)?;
        let mut scenario = scenario.clone();
        scenario.j1_true = j1;
        scenario.j2_true = j2;
        Ok(Self {
            profile: SpeedProfile::new(
                scenario.speed_profile,
                scenario.duration,
                scenario.stationary_preamble,
                scenario.seed,
            ),
            activity: SpeedProfile::new(
                match scenario.speed_profile {
                    SpeedProfileKind::Stationary => SpeedProfileKind::Stationary,
                    _ => SpeedProfileKind::Fast,
                },
                scenario.duration,
                scenario.stationary_preamble,
                scenario.seed,
            ),
            mount1: mounting(&j1, scenario.mount_twist1),
            mount2: mounting(&j2, scenario.mount_twist2),
            scenario,
        })
    }

    pub fn profile(&self) -> &SpeedProfile {
        &self.profile
    }

    /// `warp` drives the slow whole-body motion, `limb` the swing.
    fn segment1(&self, warp: (f64, f64, f64), limb: (f64, f64, f64)) -> ChainState {
        let tau = warp.0;
        let chain = ChainState::identity();
        match self.scenario.axis_mode {
            AxisMode::Free => chain
                .then(Vec3::z(), warped(FREE_BASE[0].eval(tau), warp))
                .then(Vec3::y(), warped(FREE_BASE[1].eval(tau), warp))
                .then(Vec3::x(), warped(FREE_BASE[2].eval(tau), warp))
                .then(Vec3::z(), warped(FREE_SWING.eval(limb.0), limb)),
            AxisMode::Vertical => chain.then(Vec3::z(), warped(PLANAR_BASE.eval(tau), warp)),
            AxisMode::Horizontal => chain
                .then(Vec3::x(), (FRAC_PI_2, 0.0, 0.0))
                .then(Vec3::z(), warped(PLANAR_BASE.eval(tau), warp)),
        }
    }

    /// Joint-center acceleration in the global frame.
    fn joint_center_acc(&self, warp: (f64, f64, f64)) -> Vec3 {
        if !self.scenario.translate_joint {
            return Vec3::zeros();
        }
        let acc: Vec<f64> = JOINT_CENTER
            .iter()
            .map(|h| warped(h.eval(warp.0), warp).2)
            .collect();
        match self.scenario.axis_mode {
            AxisMode::Free => Vec3::new(acc[0], acc[1], acc[2]),
            // stay in the plane normal to the joint axis
            AxisMode::Vertical => Vec3::new(acc[0], acc[1], 0.0),
            AxisMode::Horizontal => Vec3::new(acc[0], 0.0, acc[2]),
        }
    }

    pub fn state(&self, t: f64) -> KinematicState {
        let warp = self.profile.warp(t);
        let activity = self.activity.warp(t);
        let q = warped(JOINT_ANGLE.eval(warp.0), warp);
        let seg1 = self.segment1(activity, warp);
        let seg2 = seg1.then(Vec3::z(), q);

        let rot1 = seg1.rotation * self.mount1;
        let rot2 = seg2.rotation * self.mount2;
        let omega1 = rot1.transpose() * seg1.omega;
        let omega2 = rot2.transpose() * seg2.omega;
        let omega_dot1 = rot1.transpose() * seg1.omega_dot;
        let omega_dot2 = rot2.transpose() * seg2.omega_dot;

        let linear = self.joint_center_acc(activity) - self.scenario.gravity;
        let acc1 = rot1.transpose() * linear + rotational_acc_matrix(&omega1, &omega_dot1) * self.scenario.r1;
        let acc2 = rot2.transpose() * linear + rotational_acc_matrix(&omega2, &omega_dot2) * self.scenario.r2;

        KinematicState {
            rot1,
            rot2,
            omega1,
            omega2,
            omega_dot1,
            omega_dot2,
            acc1,
            acc2,
            joint_angle: q.0,
            joint_rate: q.1,
        }
    }
}

/// Sensor-to-global rotations `(R1, R2)` of a scenario at time `t`.
pub fn segment_orientation_trajectories(scenario: &HingeScenario, t: f64) -> Result<(Mat3, Mat3)> {
    let state = Motion::new(scenario)?.state(t);
    Ok((state.rot1, state.rot2))
}

/// Ground truth accompanying a simulated recording.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scenario: HingeScenario,
    pub time: Vec<f64>,
    pub states: Vec<KinematicState>,
}

impl GroundTruth {
    pub fn axes(&self) -> (Vec3, Vec3) {
        (self.scenario.j1_true, self.scenario.j2_true)
    }

    pub fn joint_angle(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.joint_angle).collect()
    }

    /// Right-hand side `j1.K1 r1 - j2.K2 r2` of the exact acceleration relation, per sample.
    pub fn rotational_acc_difference(&self) -> Vec<f64> {
        let (j1, j2) = self.axes();
        let (r1, r2) = (self.scenario.r1, self.scenario.r2);
        self.states
            .iter()
            .map(|s| {
                j1.dot(&(rotational_acc_matrix(&s.omega1, &s.omega_dot1) * r1))
                    - j2.dot(&(rotational_acc_matrix(&s.omega2, &s.omega_dot2) * r2))
            })
            .collect()
    }

    pub fn to_file(&self) -> GroundTruthFile {
        GroundTruthFile {
            j1: self.scenario.j1_true,
            j2: self.scenario.j2_true,
            r1: self.scenario.r1,
            r2: self.scenario.r2,
            joint_angle: self.joint_angle(),
            scenario: self.scenario.clone(),
        }
    }
}

/// JSON sidecar written next to a simulated recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub j1: Vec3,
    pub j2: Vec3,
    pub r1: Vec3,
    pub r2: Vec3,
    pub joint_angle: Vec<f64>,
    pub scenario: HingeScenario,
}

/// Generates a recording and its ground truth. Deterministic given the scenario seed.
pub fn simulate(scenario: &HingeScenario) -> Result<(RecordingPair, GroundTruth)> {
    let motion = Motion::new(scenario)?;
    let scenario = &motion.scenario;
    let n = scenario.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = scenario
        .noise
        .map(|m| {
            Ok::<_, Error>((
                Normal::new(0.0, m.sigma_gyro).map_err(|e| Error::Config(e.to_string()))?,
                Normal::new(0.0, m.sigma_acc).map_err(|e| Error::Config(e.to_string()))?,
            ))
        })
        .transpose()?;
    let mut perturb = |v: Vec3, gyro: bool| -> Vec3 {
        match &noise {
            None => v,
            Some((g, a)) => {
                let d = if gyro { g } else { a };
                v + Vec3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng))
            }
        }
    };

    let mut samples = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / scenario.sample_rate;
        let s = motion.state(t);
        let gyr1 = perturb(s.omega1, true) + scenario.gyro_bias1;
        let acc1 = perturb(s.acc1 * scenario.acc_scale1, false);
        let gyr2 = perturb(s.omega2, true) + scenario.gyro_bias2;
        let acc2 = perturb(s.acc2 * scenario.acc_scale2, false);
        samples.push(SamplePair {
            t,
            gyr1,
            acc1,
            gyr2,
            acc2,
        });
        time.push(t);
        states.push(s);
    }
    let mut recording = RecordingPair::from_samples(samples)?;
    recording.sample_rate = scenario.sample_rate;
    recording
        .metadata
        .insert("source".into(), "simulated hinge".into());
    recording
        .metadata
        .insert("axis_mode".into(), scenario.axis_mode.name().into());
    recording
        .metadata
        .insert("speed_profile".into(), scenario.speed_profile.name().into());
    Ok((
        recording,
        GroundTruth {
            scenario: scenario.clone(),
            time,
            states,
        },
    ))
}

/// Motion statistics of a simulated recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSummary {
    pub samples: usize,
    pub duration: f64,
    pub max_joint_rate: f64,
    pub mean_joint_rate: f64,
    pub std_joint_rate: f64,
    /// Largest true angular-rate magnitude over both sensors.
    pub max_sensor_rate: f64,
}

impl GroundTruth {
    pub fn summary(&self) -> MotionSummary {
        let rates: Vec<f64> = self.states.iter().map(|s| s.joint_rate.abs()).collect();
        let n = rates.len().max(1) as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        MotionSummary {
            samples: self.states.len(),
            duration: self.time.last().copied().unwrap_or(0.0) - self.time.first().copied().unwrap_or(0.0),
            max_joint_rate: rates.iter().copied().fold(0.0, f64::max),
            mean_joint_rate: mean,
            std_joint_rate: var.sqrt(),
            max_sensor_rate: self
                .states
                .iter()
                .map(|s| s.omega1.norm().max(s.omega2.norm()))
                .fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residuals::{acc_residual, gyro_residual};
    use crate::AxisParams;

    fn true_params(truth: &GroundTruth) -> AxisParams {
        let (j1, j2) = truth.axes();
        AxisParams::from_axes(&crate::AxisPair { j1, j2 }).unwrap()
    }

    // atan2 form, accurate for the tiny rotations between 1 ms samples
    fn log_so3(r: &Mat3) -> Vec3 {
        let v = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) / 2.0;
        let sin = v.norm();
        let cos = (r.trace() - 1.0) / 2.0;
        let angle = sin.atan2(cos);
        if sin < 1e-300 {
            v
        } else {
            v * (angle / sin)
        }
    }

    #[test]
    fn smoothstep_is_consistent() {
        let h = 1e-6;
        for &x in &[0.1, 0.37, 0.5, 0.8] {
            let (v, _, d) = smoothstep(x);
            let (vp, bigp, _) = smoothstep(x + h);
            let (vm, bigm, _) = smoothstep(x - h);
            assert!(((bigp - bigm) / (2.0 * h) - v).abs() < 1e-8);
            assert!(((vp - vm) / (2.0 * h) - d).abs() < 1e-7);
        }
        assert_eq!(smoothstep(1.0).1, 0.5);
    }

    #[test]
    fn warp_derivatives_match_differences() {
        let profile = SpeedProfile::new(SpeedProfileKind::Mixed, 60.0, 3.0, 4);
        let h = 1e-5;
        for k in 0..600 {
            let t = k as f64 * 0.1;
            let (_, rate, acc) = profile.warp(t);
            let (tp, rp, _) = profile.warp(t + h);
            let (tm, rm, _) = profile.warp(t - h);
            assert!(((tp - tm) / (2.0 * h) - rate).abs() < 1e-8, "rate at {t}");
            assert!(((rp - rm) / (2.0 * h) - acc).abs() < 1e-6, "acc at {t}");
        }
    }

    #[test]
    fn fast_and_slow_peak_rates() {
        let peak = |kind| {
            let profile = SpeedProfile::new(kind, 60.0, 0.0, 0);
            let h = 1e-5;
            (0..60_000)
                .map(|k| {
                    let t = k as f64 * 1e-3;
                    ((speed_profile_angle(&profile, t + h) - speed_profile_angle(&profile, t - h)) / (2.0 * h)).abs()
                })
                .fold(0.0, f64::max)
        };
        let fast = peak(SpeedProfileKind::Fast);
        assert!((3.5..=4.5).contains(&fast), "fast peak {fast}");
        let slow = peak(SpeedProfileKind::Slow);
        assert!(slow <= 0.7, "slow peak {slow}");
        let profile = SpeedProfile::new(SpeedProfileKind::Fast, 60.0, 0.0, 0);
        assert_eq!(speed_profile_angle(&profile, 0.0), 0.0);
    }

    #[test]
    fn mixed_profile_alternates_regimes() {
        let profile = SpeedProfile::new(SpeedProfileKind::Mixed, 120.0, 0.0, 9);
        assert!(profile.changes.len() >= 120 / 10 - 1);
        let mut last = 0.0;
        for (i, &(b, d)) in profile.changes.iter().enumerate() {
            let gap = b - last;
            assert!((5.0..=10.0).contains(&gap), "gap {gap}");
            let expected = if i % 2 == 0 { SLOW_SPEED_FACTOR - 1.0 } else { 1.0 - SLOW_SPEED_FACTOR };
            assert_eq!(d, expected);
            last = b;
        }
    }

    #[test]
    fn rotations_are_orthonormal_and_axes_coincide() {
        for mode in AxisMode::ALL {
            let scenario = HingeScenario::new(mode, SpeedProfileKind::Fast, 20.0);
            let (_, truth) = simulate(&scenario).unwrap();
            let (j1, j2) = truth.axes();
            for s in &truth.states {
                assert!((s.rot1.transpose() * s.rot1 - Mat3::identity()).norm() < 1e-12);
                assert!((s.rot2.transpose() * s.rot2 - Mat3::identity()).norm() < 1e-12);
                assert!((s.rot1 * j1 - s.rot2 * j2).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn global_axis_direction_per_mode() {
        let tol = 0.01f64.to_radians();
        for (mode, check) in [
            (AxisMode::Vertical, Box::new(|a: Vec3| a.z.abs().acos()) as Box<dyn Fn(Vec3) -> f64>),
            (AxisMode::Horizontal, Box::new(|a: Vec3| a.z.abs().asin())),
        ] {
            let scenario = HingeScenario::new(mode, SpeedProfileKind::Mixed, 30.0);
            let (_, truth) = simulate(&scenario).unwrap();
            for s in &truth.states {
                let axis = s.rot1 * scenario.j1_true.normalize();
                assert!(check(axis) < tol, "{mode:?} axis {axis:?}");
            }
        }
        let scenario = HingeScenario::new(AxisMode::Vertical, SpeedProfileKind::Fast, 5.0);
        let (_, truth) = simulate(&scenario).unwrap();
        for s in &truth.states {
            assert!((s.rot1 * truth.axes().0 - Vec3::z()).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_angle_pose_is_pure_mounting() {
        let mut scenario = HingeScenario::new(AxisMode::Vertical, SpeedProfileKind::Stationary, 1.0);
        scenario.mount_twist1 = 0.0;
        scenario.mount_twist2 = 0.0;
        let motion = Motion::new(&scenario).unwrap();
        let s = motion.state(0.0);
        assert_eq!(s.joint_angle, 0.0);
        // with q = 0 both sensors hang off the same base frame
        let base = s.rot1 * motion.mount1.transpose();
        assert!((s.rot2 - base * motion.mount2).norm() < 1e-12);
        assert!((motion.mount1 * scenario.j1_true - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn angular_velocity_matches_rotation_differences() {
        for mode in AxisMode::ALL {
            let scenario = HingeScenario::new(mode, SpeedProfileKind::Mixed, 30.0);
            let motion = Motion::new(&scenario).unwrap();
            // samples 1 ms apart; the central difference is even in h, so one
            // Richardson step removes its h^2 term
            let h = 1e-3;
            for k in 0..300 {
                let t = 0.5 + k as f64 * 0.097;
                let s: Vec<KinematicState> = (-2..=2).map(|i| motion.state(t + i as f64 * h)).collect();
                let c = &s[2];
                let rates = [
                    (s.iter().map(|x| x.rot1).collect::<Vec<_>>(), c.omega1),
                    (s.iter().map(|x| x.rot2).collect(), c.omega2),
                ];
                for (r, w) in rates {
                    let d1 = log_so3(&(r[1].transpose() * r[3])) / (2.0 * h);
                    let d2 = log_so3(&(r[0].transpose() * r[4])) / (4.0 * h);
                    let fd = (4.0 * d1 - d2) / 3.0;
                    assert!((fd - w).norm() <= 1e-6 * w.norm(), "{mode:?} t={t}: {fd:?} vs {w:?}");
                }
                let d1 = (s[3].omega1 - s[1].omega1) / (2.0 * h);
                let d2 = (s[4].omega1 - s[0].omega1) / (4.0 * h);
                let fd_dot = (4.0 * d1 - d2) / 3.0;
                assert!((fd_dot - c.omega_dot1).norm() < 1e-6 * c.omega_dot1.norm().max(1.0));
            }
        }
    }

    #[test]
    fn fixed_axis_rotation_satisfies_both_constraints_exactly() {
        let mut scenario = HingeScenario::new(AxisMode::Vertical, SpeedProfileKind::Fast, 20.0);
        scenario.translate_joint = false;
        let (rec, truth) = simulate(&scenario).unwrap();
        let x = true_params(&truth);
        for s in &rec.samples {
            assert!(gyro_residual(s, &x, 1.0).abs() < 1e-10);
            assert!(acc_residual(s, &x, 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn free_motion_acceleration_relation_is_exact() {
        let scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 20.0);
        let (rec, truth) = simulate(&scenario).unwrap();
        let x = true_params(&truth);
        let rhs = truth.rotational_acc_difference();
        assert!(rhs.iter().any(|v| v.abs() > 1e-2));
        for (s, expected) in rec.samples.iter().zip(rhs) {
            assert!(gyro_residual(s, &x, 1.0).abs() < 1e-10);
            assert!((acc_residual(s, &x, 1.0) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_reads_gravity_and_bias() {
        let mut scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Stationary, 2.0);
        scenario.gyro_bias1 = Vec3::new(0.01, -0.02, 0.005);
        scenario.gyro_bias2 = Vec3::new(-0.003, 0.0, 0.02);
        let (rec, _) = simulate(&scenario).unwrap();
        for s in &rec.samples {
            assert!((s.acc1.norm() - 9.81).abs() < 1e-12);
            assert!((s.acc2.norm() - 9.81).abs() < 1e-12);
            assert_eq!(s.gyr1, scenario.gyro_bias1);
            assert_eq!(s.gyr2, scenario.gyro_bias2);
        }
    }

    #[test]
    fn noise_matches_model_and_is_seeded() {
        let noise = NoiseModel::REFERENCE;
        let scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 120.0)
            .with_noise(noise)
            .with_seed(5);
        let (rec, truth) = simulate(&scenario).unwrap();
        let (again, _) = simulate(&scenario).unwrap();
        assert_eq!(rec, again);
        for axis in 0..3 {
            let std = |errs: Vec<f64>| {
                let n = errs.len() as f64;
                let m = errs.iter().sum::<f64>() / n;
                (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            let gyro: Vec<f64> = rec.samples.iter().zip(&truth.states).map(|(s, t)| s.gyr2[axis] - t.omega2[axis]).collect();
            let acc: Vec<f64> = rec.samples.iter().zip(&truth.states).map(|(s, t)| s.acc1[axis] - t.acc1[axis]).collect();
            assert!((std(gyro) / noise.sigma_gyro - 1.0).abs() < 0.05);
            assert!((std(acc) / noise.sigma_acc - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn sample_count_and_summary() {
        let scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 60.0);
        let (rec, truth) = simulate(&scenario).unwrap();
        assert_eq!(rec.len(), 6000);
        let summary = truth.summary();
        assert!((3.5..=4.5).contains(&summary.max_joint_rate));
    }

    #[test]
    fn preamble_is_at_rest() {
        let mut scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 20.0);
        scenario.stationary_preamble = 5.0;
        let (rec, _) = simulate(&scenario).unwrap();
        for s in rec.samples.iter().filter(|s| s.t <= 5.0) {
            assert!(s.gyr1.norm() < 1e-12 && s.gyr2.norm() < 1e-12);
            assert!((s.acc1.norm() - 9.81).abs() < 1e-12);
        }
        assert!(rec.samples.iter().any(|s| s.gyr2.norm() > 0.1));
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 10.0);
        scenario.j1_true = Vec3::new(1.0, 1.0, 0.0);
        assert!(simulate(&scenario).is_err());
        let mut scenario = HingeScenario::new(AxisMode::Free, SpeedProfileKind::Fast, 10.0);
        scenario.sample_rate = 0.0;
        assert!(simulate(&scenario).is_err());
    }
}
