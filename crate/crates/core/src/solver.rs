//! Gauss-Newton minimization of the weighted constraint cost over the four
//! spherical axis parameters.
//!
//! Each iteration solves the 4x4 normal equations `J^T J d = -J^T e` and
//! backtracks along `d` until the cost decreases. Levenberg damping is added
//! only when the normal matrix is numerically singular, which happens near
//! the cone points of the gyroscope residual and for motions that excite
//! fewer than four directions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{AxisPair, AxisParams};
use crate::residuals::{AxisFrame, ResidualWeights, SamplePair};

/// Condition estimate above which the normal matrix is treated as singular.
const MAX_CONDITION: f64 = 1e12;
const MAX_DAMPING: f64 = 1e6;
/// A full Gauss-Newton step shorter than this that still cannot decrease the
/// cost is a stationary point at rounding level.
const STALL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// rad
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
    /// Levenberg damping applied on every iteration; 0 is pure Gauss-Newton.
    pub damping_initial: f64,
    /// First damping tried when the normal matrix is singular.
    pub damping_fallback: f64,
    pub line_search_shrink: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-10,
            damping_initial: 0.0,
            damping_fallback: 1e-6,
            line_search_shrink: 0.5,
            max_backtracks: 30,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.max_iterations < 1 || self.max_backtracks < 1 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        if !positive(self.step_tolerance) || !positive(self.gradient_tolerance) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !self.damping_initial.is_finite() || self.damping_initial < 0.0 || !positive(self.damping_fallback) {
            return Err(Error::Config("damping must be non-negative".into()));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::Config("line_search_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepTolerance,
    GradientTolerance,
    /// No descent possible and the full step is at rounding level.
    Stalled,
    LineSearchFailed,
    MaxIterations,
    /// Normal equations singular at every damping level.
    Degenerate,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(
            self,
            Termination::StepTolerance | Termination::GradientTolerance | Termination::Stalled
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub cost: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub params: AxisParams,
    pub axes: AxisPair,
    pub initial: AxisParams,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
}

/// Samples with their accelerometer weights resolved once.
struct Problem<'a> {
    data: &'a [SamplePair],
    w_gyro: f64,
    w_acc: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(data: &'a [SamplePair], weights: &ResidualWeights) -> Self {
        Self {
            data,
            w_gyro: weights.w_gyro,
            w_acc: data.iter().map(|s| weights.acc_weight_for(s)).collect(),
        }
    }

    fn cost(&self, x: &AxisParams) -> f64 {
        let frame = AxisFrame::new(x);
        let (j1, j2) = (frame.j1, frame.j2);
        self.data
            .iter()
            .zip(&self.w_acc)
            .map(|(s, &wa)| {
                let eg = self.w_gyro * (s.gyr1.cross(&j1).norm() - s.gyr2.cross(&j2).norm());
                let ea = wa * (j1.dot(&s.acc1) - j2.dot(&s.acc2));
                eg * eg + ea * ea
            })
            .sum()
    }

    /// Cost, normal matrix `J^T J` and gradient `J^T e`, accumulated in sample order.
    #[allow(clippy::needless_range_loop)]
    fn normal_equations(&self, x: &AxisParams) -> (f64, [[f64; 4]; 4], [f64; 4]) {
        let frame = AxisFrame::new(x);
        let mut cost = 0.0;
        let mut h = [[0.0; 4]; 4];
        let mut g = [0.0; 4];
        let mut accumulate = |e: f64, row: &[f64; 4]| {
            cost += e * e;
            for i in 0..4 {
                g[i] += row[i] * e;
                for j in 0..=i {
                    h[i][j] += row[i] * row[j];
                }
            }
        };
        for (s, &wa) in self.data.iter().zip(&self.w_acc) {
            let (eg, rg) = frame.gyro(s, self.w_gyro);
            accumulate(eg, &rg);
            let (ea, ra) = frame.acc(s, wa);
            accumulate(ea, &ra);
        }
        for i in 0..4 {
            for j in 0..i {
                h[j][i] = h[i][j];
            }
        }
        (cost, h, g)
    }
}

/// Solves the symmetric positive semi-definite system `a x = b` by an
/// `L D L^T` factorization with diagonal pivoting.
///
/// Returns the solution and the pivot ratio `max(D) / min(D)` as a condition
/// estimate, or `None` when a pivot is not positive.
pub(crate) fn ldlt_solve(a: &[[f64; 4]; 4], b: &[f64; 4]) -> Option<([f64; 4], f64)> {
    let mut m = *a;
    let mut perm = [0usize, 1, 2, 3];
    let mut l = [[0.0; 4]; 4];
    let mut d = [0.0; 4];
    for k in 0..4 {
        let pivot = (k..4)
            .max_by(|&i, &j| m[i][i].total_cmp(&m[j][j]))
            .unwrap_or(k);
        if pivot != k {
            m.swap(k, pivot);
            for row in m.iter_mut() {
                row.swap(k, pivot);
            }
            l.swap(k, pivot);
            perm.swap(k, pivot);
        }
        let dk = m[k][k];
        if !(dk > 0.0 && dk.is_finite()) {
            return None;
        }
        d[k] = dk;
        l[k][k] = 1.0;
        for i in k + 1..4 {
            l[i][k] = m[i][k] / dk;
        }
        for i in k + 1..4 {
            for j in k + 1..4 {
                m[i][j] -= l[i][k] * dk * l[j][k];
            }
        }
    }
    let mut y = [0.0; 4];
    for i in 0..4 {
        y[i] = b[perm[i]];
        for j in 0..i {
            y[i] -= l[i][j] * y[j];
        }
    }
    for i in 0..4 {
        y[i] /= d[i];
    }
    for i in (0..4).rev() {
        for j in i + 1..4 {
            y[i] -= l[j][i] * y[j];
        }
    }
    let mut x = [0.0; 4];
    for i in 0..4 {
        x[perm[i]] = y[i];
    }
    let dmax = d.iter().cloned().fold(f64::MIN, f64::max);
    let dmin = d.iter().cloned().fold(f64::MAX, f64::min);
    Some((x, dmax / dmin))
}

/// Gauss-Newton step, damped only as far as needed to make the system well conditioned.
fn solve_step(h: &[[f64; 4]; 4], g: &[f64; 4], config: &SolverConfig) -> Option<[f64; 4]> {
    let rhs = g.map(|v| -v);
    let scale = (0..4).map(|i| h[i][i]).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let damped = |lambda: f64| {
        let mut a = *h;
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += lambda * scale;
        }
        a
    };
    let mut lambda = config.damping_initial;
    loop {
        if let Some((step, condition)) = ldlt_solve(&damped(lambda), &rhs) {
            if condition <= MAX_CONDITION {
                return Some(step);
            }
        }
        lambda = if lambda < config.damping_fallback {
            config.damping_fallback
        } else {
            lambda * 10.0
        };
        if lambda > MAX_DAMPING {
            return None;
        }
    }
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Weighted cost `sum_k e_gyr(k, x)^2 + e_acc(k, x)^2`.
pub fn cost(x: &AxisParams, data: &[SamplePair], weights: &ResidualWeights) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cost needs at least one sample".into()));
    }
    Ok(Problem::new(data, weights).cost(x))
}

/// Runs Gauss-Newton from `x0`.
pub fn estimate_axes(
    data: &[SamplePair],
    weights: &ResidualWeights,
    config: &SolverConfig,
    x0: AxisParams,
) -> Result<EstimationResult> {
    if data.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "estimation needs at least 4 samples, got {}",
            data.len()
        )));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidArgument("initial parameters must be finite".into()));
    }
    config.validate()?;

    let problem = Problem::new(data, weights);
    let mut x = x0.canonical();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let (mut cost, mut h, mut g) = problem.normal_equations(&x);
    trace.push(TraceEntry {
        iteration: 0,
        cost,
        step_norm: 0.0,
    });

    while iterations < config.max_iterations {
        if norm4(&g) < config.gradient_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }
        let Some(step) = solve_step(&h, &g, config) else {
            log::debug!("normal equations singular at every damping level");
            termination = Termination::Degenerate;
            break;
        };
        let full_norm = norm4(&step);

        let base = x.to_array();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial = AxisParams::from_array(std::array::from_fn(|i| base[i] + alpha * step[i]));
            let trial = trial.canonical();
            let trial_cost = problem.cost(&trial);
            if trial_cost < cost {
                accepted = Some((trial, trial_cost));
                break;
            }
            alpha *= config.line_search_shrink;
        }
        let Some((next, next_cost)) = accepted else {
            termination = if full_norm < STALL_STEP {
                Termination::Stalled
            } else {
                Termination::LineSearchFailed
            };
            break;
        };

        iterations += 1;
        x = next;
        (_, h, g) = problem.normal_equations(&x);
        // keep the line-search value so the trace decreases strictly
        cost = next_cost;
        let step_norm = alpha * full_norm;
        trace.push(TraceEntry {
            iteration: iterations,
            cost,
            step_norm,
        });
        if step_norm < config.step_tolerance {
            termination = Termination::StepTolerance;
            break;
        }
    }

    Ok(EstimationResult {
        params: x,
        axes: x.axes(),
        initial: x0,
        final_cost: cost,
        iterations,
        converged: termination.is_converged(),
        termination,
        trace,
    })
}

/// Draws both axes independently and uniformly on the unit sphere.
pub fn random_initialization(seed: u64) -> AxisParams {
    random_initialization_stream(seed, 0)
}

/// Like [`random_initialization`] on an independent stream of the same seed.
pub fn random_initialization_stream(seed: u64, stream: u64) -> AxisParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut draw = || {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(-PI..PI);
        (z.asin(), phi)
    };
    let (theta1, phi1) = draw();
    let (theta2, phi2) = draw();
    AxisParams::new(theta1, phi1, theta2, phi2).canonical()
}

/// Runs `n_starts` seeded solves in parallel and keeps the lowest final cost.
///
/// Start `i` is initialized from stream `i` of `seed`, so a single start
/// reproduces [`estimate_axes`] from [`random_initialization`]`(seed)`.
pub fn estimate_axes_multistart(
    data: &[SamplePair],
    weights: &ResidualWeights,
    config: &SolverConfig,
    n_starts: usize,
    seed: u64,
) -> Result<EstimationResult> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
    }
    let runs = (0..n_starts as u64)
        .into_par_iter()
        .map(|i| estimate_axes(data, weights, config, random_initialization_stream(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<EstimationResult> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.final_cost < b.final_cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}
