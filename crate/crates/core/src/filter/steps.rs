//! Individual stages of one filter update. Per-particle stages draw from
//! substreams keyed by particle position, so they may run in parallel.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{Resampler, DRIFT_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::integrate::Stepper;
use crate::rng::{substream, Purpose};

/// Moves every drift coefficient toward the current mean:
/// `a * sigma + (1 - a) * mean`.
pub fn shrink_drift(drift: &[f64], mean: &[f64], a: f64) -> Vec<f64> {
    let p = mean.len();
    drift.iter().enumerate().map(|(i, &s)| a * s + (1.0 - a) * mean[i % p]).collect()
}

/// Forward map of every particle across one observation interval with its
/// source parameter held fixed. Only the first parameter component drives
/// the single loading vector.
pub fn propagate_states(states: &[f64], thetas: &[f64], theta_dim: usize, stepper: &Stepper) -> Vec<f64> {
    let d = stepper.system().dim();
    let mut out = states.to_vec();
    out.par_chunks_mut(d).enumerate().for_each_init(Vec::new, |scratch, (n, u)| {
        stepper.advance(u, thetas[n * theta_dim], scratch);
    });
    out
}

/// `-||y - G u||^2 / (2 sigma^2)` with `G` selecting the observed components.
pub fn log_likelihood(state: &[f64], y: &[f64], observed: &[usize], sigma: f64) -> f64 {
    let ss: f64 = observed.iter().zip(y).map(|(&k, &yk)| (yk - state[k]).powi(2)).sum();
    -ss / (2.0 * sigma * sigma)
}

/// Exponentiates and normalizes log weights after subtracting their maximum.
pub fn normalize_log_weights(log_w: &[f64], step: usize) -> Result<Vec<f64>> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights { step });
    }
    let mut w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights { step });
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

fn check_observations(y: &[f64], observed: &[usize], d: usize) -> Result<()> {
    if y.len() != observed.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} measurements for {} observed components",
            y.len(),
            observed.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("measurements must be finite");
    }
    if observed.iter().any(|&k| k >= d) {
        return invalid("observed index outside the state");
    }
    Ok(())
}

/// Prior weights times the likelihood of each predictor, normalized.
pub fn fitness_weights(
    weights: &[f64],
    predictors: &[f64],
    state_dim: usize,
    y: &[f64],
    observed: &[usize],
    sigma_d: f64,
    step: usize,
) -> Result<Vec<f64>> {
    check_observations(y, observed, state_dim)?;
    let log_g: Vec<f64> = predictors
        .par_chunks(state_dim)
        .zip(weights.par_iter())
        .map(|(u, &w)| w.ln() + log_likelihood(u, y, observed, sigma_d))
        .collect();
    normalize_log_weights(&log_g, step)
}

/// Draws `N` auxiliary indices with `P(index = k) = g_k`.
///
/// Multinomial draws take one uniform per output slot from that slot's
/// substream; the systematic variant uses a single offset for the step.
pub fn resample_indices(g: &[f64], seed: u64, step: usize, method: Resampler) -> Vec<usize> {
    let n = g.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in g {
        acc += w;
        cumulative.push(acc);
    }
    let last_positive = g.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1);
    let pick = |u: f64| {
        let target = u * acc;
        let k = cumulative.partition_point(|&c| c <= target);
        k.min(last_positive)
    };
    match method {
        Resampler::Multinomial => (0..n)
            .map(|slot| {
                let u: f64 = substream(seed, step as u64, slot as u64, Purpose::Resample).random();
                pick(u)
            })
            .collect(),
        Resampler::Systematic => {
            let offset: f64 = substream(seed, step as u64, 0, Purpose::Resample).random();
            (0..n).map(|slot| pick((slot as f64 + offset) / n as f64)).collect()
        }
    }
}

/// Gathers rows of a row-major array by index.
pub fn gather_rows(data: &[f64], width: usize, indices: &[usize]) -> Result<Vec<f64>> {
    let rows = data.len().checked_div(width).unwrap_or(0);
    let mut out = Vec::with_capacity(indices.len() * width);
    for &k in indices {
        if k >= rows {
            return Err(Error::InvalidArgument(format!(
                "internal invariant violated: resampling index {k} out of range for {rows} particles"
            )));
        }
        out.extend_from_slice(&data[k * width..(k + 1) * width]);
    }
    Ok(out)
}

/// Reordered particle arrays after auxiliary resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Reshuffled {
    pub states: Vec<f64>,
    pub thetas: Vec<f64>,
    pub shrunk_drift: Vec<f64>,
    pub predictors: Vec<f64>,
}

pub fn reshuffle(
    states: &[f64],
    thetas: &[f64],
    shrunk_drift: &[f64],
    predictors: &[f64],
    state_dim: usize,
    theta_dim: usize,
    indices: &[usize],
) -> Result<Reshuffled> {
    Ok(Reshuffled {
        states: gather_rows(states, state_dim, indices)?,
        thetas: gather_rows(thetas, theta_dim, indices)?,
        shrunk_drift: gather_rows(shrunk_drift, theta_dim, indices)?,
        predictors: gather_rows(predictors, state_dim, indices)?,
    })
}

/// Adds `N(0, sigma_c^2 I)` innovation to every predictor.
pub fn innovate_states(predictors: &[f64], state_dim: usize, sigma_c: f64, seed: u64, step: usize) -> Vec<f64> {
    let mut out = predictors.to_vec();
    if sigma_c == 0.0 {
        return out;
    }
    out.par_chunks_mut(state_dim).enumerate().for_each(|(n, u)| {
        let mut rng = substream(seed, step as u64, n as u64, Purpose::StateNoise);
        for x in u {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += sigma_c * z;
        }
    });
    out
}

/// Lower Cholesky factor of a symmetric positive semidefinite matrix;
/// numerically null directions get zero columns.
pub fn psd_cholesky(cov: &[f64], p: usize) -> Vec<f64> {
    let scale = (0..p).map(|i| cov[i * p + i].abs()).fold(0.0, f64::max);
    let tol = 1e-14 * scale;
    let mut l = vec![0.0f64; p * p];
    for j in 0..p {
        let s = cov[j * p + j] - (0..j).map(|k| l[j * p + k].powi(2)).sum::<f64>();
        if s <= tol {
            continue;
        }
        let ljj = s.sqrt();
        l[j * p + j] = ljj;
        for i in j + 1..p {
            let dot: f64 = (0..j).map(|k| l[i * p + k] * l[j * p + k]).sum();
            l[i * p + j] = (cov[i * p + j] - dot) / ljj;
        }
    }
    l
}

/// Shrunk drift coefficients plus `N(0, (1 - a^2) S)` jitter, without any
/// positivity correction.
pub fn jitter_drift_unclamped(shrunk: &[f64], cov: &[f64], a: f64, seed: u64, step: usize) -> Vec<f64> {
    let p = (cov.len() as f64).sqrt() as usize;
    let r = (1.0 - a * a).max(0.0).sqrt();
    let chol = psd_cholesky(cov, p);
    let mut out = shrunk.to_vec();
    if chol.iter().all(|&v| v == 0.0) {
        return out;
    }
    out.par_chunks_mut(p).enumerate().for_each(|(n, sigma)| {
        let mut rng = substream(seed, step as u64, n as u64, Purpose::DriftJitter);
        let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        for (i, s) in sigma.iter_mut().enumerate() {
            let zeta: f64 = (0..=i).map(|k| chol[i * p + k] * z[k]).sum();
            *s += r * zeta;
        }
    });
    out
}

/// Jittered drift coefficients reflected at [`DRIFT_FLOOR`]. Components that
/// received no jitter are left untouched.
pub fn jitter_drift(shrunk: &[f64], cov: &[f64], a: f64, seed: u64, step: usize) -> Vec<f64> {
    let p = (cov.len() as f64).sqrt() as usize;
    let mut out = jitter_drift_unclamped(shrunk, cov, a, seed, step);
    let jittered: Vec<bool> = (0..p).map(|i| cov[i * p + i] > 0.0 && a < 1.0).collect();
    for (i, s) in out.iter_mut().enumerate() {
        if jittered[i % p] {
            *s = s.abs().max(DRIFT_FLOOR);
        }
    }
    out
}

/// Random-walk step `theta + sigma_E * z` for every particle and component.
pub fn propagate_tvp(thetas: &[f64], drift: &[f64], theta_dim: usize, seed: u64, step: usize) -> Vec<f64> {
    let mut out = thetas.to_vec();
    out.par_chunks_mut(theta_dim).enumerate().for_each(|(n, theta)| {
        let mut rng = substream(seed, step as u64, n as u64, Purpose::ThetaNoise);
        for (i, t) in theta.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *t += drift[n * theta_dim + i] * z;
        }
    });
    out
}

/// Likelihood ratio of innovated states to their predictors, normalized.
pub fn reweight(
    states: &[f64],
    predictors: &[f64],
    state_dim: usize,
    y: &[f64],
    observed: &[usize],
    sigma_d: f64,
    step: usize,
) -> Result<Vec<f64>> {
    check_observations(y, observed, state_dim)?;
    let log_w: Vec<f64> = states
        .par_chunks(state_dim)
        .zip(predictors.par_chunks(state_dim))
        .map(|(u, u_hat)| log_likelihood(u, y, observed, sigma_d) - log_likelihood(u_hat, y, observed, sigma_d))
        .collect();
    normalize_log_weights(&log_w, step)
}

/// Weighted mean and covariance of the drift coefficients (no bias correction).
pub fn update_drift_moments(drift: &[f64], theta_dim: usize, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = theta_dim;
    // offsets from the first particle keep identical particles exact
    let reference = drift[..p].to_vec();
    let mut mean = reference.clone();
    for (row, &w) in drift.chunks(p).zip(weights) {
        for ((m, s), r) in mean.iter_mut().zip(row).zip(&reference) {
            *m += w * (s - r);
        }
    }
    let mut cov = vec![0.0; p * p];
    for (row, &w) in drift.chunks(p).zip(weights) {
        for i in 0..p {
            for j in 0..=i {
                cov[i * p + j] += w * (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            cov[j * p + i] = cov[i * p + j];
        }
    }
    (mean, cov)
}

/// Effective sample size `1 / sum(w^2)`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}
