use rand::Rng;

use super::config::FilterConfig;
use crate::error::Result;
use crate::rng::{substream, Purpose};

/// Particle cloud over states, source parameters and drift coefficients.
/// All per-particle arrays are row-major with one row per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub(crate) particles: usize,
    pub(crate) state_dim: usize,
    pub(crate) theta_dim: usize,
    pub states: Vec<f64>,
    pub thetas: Vec<f64>,
    pub drift: Vec<f64>,
    pub weights: Vec<f64>,
    /// Weighted mean of the drift coefficients.
    pub drift_mean: Vec<f64>,
    /// Weighted covariance of the drift coefficients, `p x p` row-major.
    pub drift_cov: Vec<f64>,
}

impl Ensemble {
    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn theta_dim(&self) -> usize {
        self.theta_dim
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.state_dim..(n + 1) * self.state_dim]
    }

    pub fn theta(&self, n: usize) -> &[f64] {
        &self.thetas[n * self.theta_dim..(n + 1) * self.theta_dim]
    }

    pub fn drift_of(&self, n: usize) -> &[f64] {
        &self.drift[n * self.theta_dim..(n + 1) * self.theta_dim]
    }
}

/// Draws the prior ensemble with equal weights.
pub fn init_ensemble(cfg: &FilterConfig, state_dim: usize) -> Result<Ensemble> {
    cfg.validate(state_dim)?;
    let n = cfg.particles;
    let p = cfg.theta_dim();
    let mut states = Vec::with_capacity(n * state_dim);
    let mut thetas = Vec::with_capacity(n * p);
    let mut drift = Vec::with_capacity(n * p);
    for k in 0..n {
        let mut rng = substream(cfg.seed, 0, k as u64, Purpose::Prior);
        states.extend(cfg.state_prior.iter().map(|r| r.at(rng.random::<f64>())));
        thetas.extend(cfg.theta_prior.iter().map(|r| r.at(rng.random::<f64>())));
        drift.extend((0..p).map(|_| cfg.drift_prior.at(rng.random::<f64>())));
    }
    let weights = vec![1.0 / n as f64; n];
    let (drift_mean, drift_cov) = super::steps::update_drift_moments(&drift, p, &weights);
    Ok(Ensemble { particles: n, state_dim, theta_dim: p, states, thetas, drift, weights, drift_mean, drift_cov })
}
