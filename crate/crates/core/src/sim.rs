//! Time-domain simulation of `x(k+1) = x(k) - K x(k - tau)` and empirical
//! rate estimation from the decay of the disagreement.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gains::GainMatrix;
use crate::spectral::symmetric_eigen;

/// Disagreement below this fraction of `|x(0)|` counts as converged.
pub const SIGNAL_FLOOR: f64 = 1e-13;

/// States `x(0), ..., x(horizon)` of one run. The history before `k = 0` is
/// held at `x(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub tau: usize,
    pub gain: GainMatrix,
}

/// `K x` using the edge weights directly.
fn apply_gain(gain: &GainMatrix, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&(i, j), &w) in gain.pattern().edges().iter().zip(gain.weights()) {
        let d = w * (x[i] - x[j]);
        out[i] += d;
        out[j] -= d;
    }
}

fn step(gain: &GainMatrix, current: &[f64], delayed: &[f64], scratch: &mut [f64]) -> Vec<f64> {
    apply_gain(gain, delayed, scratch);
    current
        .iter()
        .zip(scratch.iter())
        .map(|(x, u)| x - u)
        .collect()
}

pub fn simulate(gain: &GainMatrix, tau: usize, x0: &[f64], horizon: usize) -> Result<Trajectory> {
    if x0.len() != gain.n() {
        return Err(Error::DimensionMismatch {
            expected: gain.n(),
            got: x0.len(),
        });
    }
    if horizon < tau + 2 {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must be at least tau + 2 = {}",
            tau + 2
        )));
    }
    // history[0] = x(k - tau), history[tau] = x(k)
    let mut history: VecDeque<Vec<f64>> = std::iter::repeat_n(x0.to_vec(), tau + 1).collect();
    let mut scratch = vec![0.0; x0.len()];
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0.to_vec());
    for _ in 0..horizon {
        let next = step(gain, &history[tau], &history[0], &mut scratch);
        history.pop_front();
        history.push_back(next.clone());
        states.push(next);
    }
    Ok(Trajectory {
        states,
        tau,
        gain: gain.clone(),
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn initial_average(&self) -> f64 {
        let x0 = &self.states[0];
        x0.iter().sum::<f64>() / x0.len() as f64
    }

    /// `|x(k) - avg(x(0)) 1|` for every k.
    pub fn disagreement(&self) -> Vec<f64> {
        let avg = self.initial_average();
        self.states
            .iter()
            .map(|x| x.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>().sqrt())
            .collect()
    }

    /// Largest deviation of `sum(x(k))` from `sum(x(0))`.
    pub fn sum_drift(&self) -> f64 {
        let s0: f64 = self.states[0].iter().sum();
        self.states
            .iter()
            .map(|x| (x.iter().sum::<f64>() - s0).abs())
            .fold(0.0, f64::max)
    }

    /// Recomputes every step from the stored states and checks bitwise
    /// equality with the recorded ones.
    pub fn recheck(&self) -> bool {
        let mut scratch = vec![0.0; self.gain.n()];
        (0..self.horizon()).all(|k| {
            let delayed = &self.states[k.saturating_sub(self.tau)];
            step(&self.gain, &self.states[k], delayed, &mut scratch) == self.states[k + 1]
        })
    }

    /// `k,x_0,...,x_{N-1}` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for i in 0..self.gain.n() {
            let _ = write!(out, ",x_{i}");
        }
        out.push('\n');
        for (k, x) in self.states.iter().enumerate() {
            let _ = write!(out, "{k}");
            for v in x {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Geometric decay factor of the disagreement: exponential of the
/// least-squares slope of `ln |x(k) - avg 1|` over `k` in `[burn_in, horizon]`.
///
/// If the disagreement reaches the signal floor before the horizon, the fit
/// window is cut there and `burn_in` shrinks in proportion.
pub fn empirical_rate(traj: &Trajectory, burn_in: usize) -> Result<f64> {
    let horizon = traj.horizon();
    if 2 * burn_in >= horizon {
        return Err(Error::InvalidInput(format!(
            "burn-in {burn_in} must be below half the horizon {horizon}"
        )));
    }
    let d = traj.disagreement();
    let floor = SIGNAL_FLOOR * norm(&traj.states[0]);
    let end = match d.iter().position(|&v| !(v >= floor) || v == 0.0) {
        Some(0) => {
            return Err(Error::InsufficientSignal(
                "initial state is already at consensus".into(),
            ))
        }
        Some(cut) => cut - 1,
        None => horizon,
    };
    let start = burn_in * end / horizon;
    if traj.states[start..=end].windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::InsufficientSignal("trajectory is constant".into()));
    }
    if end < start + 2 {
        return Err(Error::InsufficientSignal(format!(
            "only {} usable samples before the disagreement hit the floor",
            end + 1 - start
        )));
    }
    let points: Vec<(f64, f64)> = (start..=end).map(|k| (k as f64, d[k].ln())).collect();
    let m = points.len() as f64;
    let mean_k = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(k, y) in &points {
        sxy += (k - mean_k) * (y - mean_y);
        sxx += (k - mean_k) * (k - mean_k);
    }
    Ok((sxy / sxx).exp())
}

/// Seeded standard-normal initial state whose centered part has a
/// non-negligible component along the eigenvectors of the smallest nonzero
/// and the largest eigenvalue of `gain`. Resamples up to 10 times.
pub fn generic_initial_state(gain: &GainMatrix, seed: u64) -> Result<Vec<f64>> {
    let n = gain.n();
    let (_, vectors) = symmetric_eigen(&gain.to_dense())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = Vec::new();
    for _ in 0..10 {
        x = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let size = norm(&centered);
        let ok = [1.min(n - 1), n - 1].iter().all(|&c| {
            let proj: f64 = vectors
                .column(c)
                .iter()
                .zip(&centered)
                .map(|(a, b)| a * b)
                .sum();
            proj.abs() >= 1e-3 * size
        });
        if ok && size > 0.0 {
            break;
        }
    }
    Ok(x)
}
