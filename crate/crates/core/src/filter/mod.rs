//! Online phase: auxiliary particle filter over states, the source parameter
//! and its drift coefficient.
//!
//! One update from observation `j` to `j + 1`:
//!
//! 1. shrink drift coefficients toward their weighted mean (Liu-West),
//! 2. propagate states with each particle's parameter held fixed,
//! 3. weight predictors by prior weight times likelihood,
//! 4. draw auxiliary indices from those fitness weights,
//! 5. reorder states, parameters, shrunk drift and predictors,
//! 6. add state innovation noise,
//! 7. jitter the drift coefficients with the shrinkage-compensating variance,
//! 8. and 9. random-walk the parameters with per-particle drift,
//! 10. reweight by the likelihood ratio of innovated states to predictors,
//! 11. refresh the drift mean and covariance.

mod config;
mod ensemble;
mod steps;

use log::debug;
use rayon::prelude::*;

pub use config::{multiplicative_prior, shrink_factor, FilterConfig, Resampler, UniformRange, DRIFT_FLOOR};
pub use ensemble::{init_ensemble, Ensemble};
pub use steps::{
    effective_sample_size, fitness_weights, gather_rows, innovate_states, jitter_drift, jitter_drift_unclamped,
    log_likelihood, normalize_log_weights, propagate_states, propagate_tvp, psd_cholesky, resample_indices, reshuffle,
    reweight, shrink_drift, update_drift_moments, Reshuffled,
};

use crate::error::{invalid, Error, Result};
use crate::integrate::IntegratorConfig;
use crate::mesh::LinearOdeSystem;
use crate::stats::{Band, WeightedSample};
use crate::synth::{ObservationSchedule, StepperCache};

/// Weighted summaries of the ensemble at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub time: f64,
    pub states: Vec<Band>,
    pub theta: Vec<Band>,
    pub drift: Vec<Band>,
    pub effective_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    /// Prior summary followed by one entry per observation time.
    pub steps: Vec<StepSummary>,
    /// Final drift coefficients, `N x p` row-major.
    pub final_drift: Vec<f64>,
    pub final_weights: Vec<f64>,
}

impl FilterSummary {
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time).collect()
    }

    pub fn theta_means(&self, component: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.theta[component].mean).collect()
    }

    pub fn state_means(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.states.iter().map(|b| b.mean).collect()).collect()
    }

    pub fn state_band(&self, component: usize) -> Vec<Band> {
        self.steps.iter().map(|s| s.states[component]).collect()
    }

    pub fn theta_band(&self, component: usize) -> Vec<Band> {
        self.steps.iter().map(|s| s.theta[component]).collect()
    }

    /// Final drift coefficients of one component, paired with the final weights.
    pub fn final_drift_component(&self, component: usize) -> Vec<f64> {
        let p = self.final_drift.len() / self.final_weights.len();
        self.final_drift.iter().skip(component).step_by(p).copied().collect()
    }
}

fn column_bands(data: &[f64], width: usize, weights: &[f64]) -> Vec<Band> {
    (0..width)
        .into_par_iter()
        .map(|k| {
            let column: Vec<f64> = data.iter().skip(k).step_by(width).copied().collect();
            let ws = WeightedSample::new(&column, weights).expect("normalized filter weights");
            Band::of(&ws)
        })
        .collect()
}

pub fn summarize(ensemble: &Ensemble, time: f64) -> StepSummary {
    StepSummary {
        time,
        states: column_bands(&ensemble.states, ensemble.state_dim, &ensemble.weights),
        theta: column_bands(&ensemble.thetas, ensemble.theta_dim, &ensemble.weights),
        drift: column_bands(&ensemble.drift, ensemble.theta_dim, &ensemble.weights),
        effective_sample_size: effective_sample_size(&ensemble.weights),
    }
}

/// Runs one full update of `ensemble` from `t0` to the observation `y` at `t1`.
#[allow(clippy::too_many_arguments)]
pub fn filter_step(
    ensemble: &mut Ensemble,
    stepper: &crate::integrate::Stepper,
    y: &[f64],
    observed: &[usize],
    cfg: &FilterConfig,
    step: usize,
) -> Result<()> {
    let (d, p) = (ensemble.state_dim, ensemble.theta_dim);
    let a = cfg.shrink_factor();

    let shrunk = shrink_drift(&ensemble.drift, &ensemble.drift_mean, a);
    let predictors = propagate_states(&ensemble.states, &ensemble.thetas, p, stepper);
    let g = fitness_weights(&ensemble.weights, &predictors, d, y, observed, cfg.sigma_d, step)?;
    let indices = resample_indices(&g, cfg.seed, step, cfg.resampler);
    let r = reshuffle(&ensemble.states, &ensemble.thetas, &shrunk, &predictors, d, p, &indices)?;
    let states = innovate_states(&r.predictors, d, cfg.sigma_c, cfg.seed, step);
    let drift = jitter_drift(&r.shrunk_drift, &ensemble.drift_cov, a, cfg.seed, step);
    let thetas = propagate_tvp(&r.thetas, &drift, p, cfg.seed, step);
    let weights = reweight(&states, &r.predictors, d, y, observed, cfg.sigma_d, step)?;
    let (drift_mean, drift_cov) = update_drift_moments(&drift, p, &weights);

    ensemble.states = states;
    ensemble.thetas = thetas;
    ensemble.drift = drift;
    ensemble.weights = weights;
    ensemble.drift_mean = drift_mean;
    ensemble.drift_cov = drift_cov;
    Ok(())
}

/// Filters the whole observation record. The schedule's observed indices
/// select the measured state components; truth is never consulted.
pub fn run_filter(
    system: &LinearOdeSystem,
    schedule: &ObservationSchedule,
    measurements: &[Vec<f64>],
    cfg: &FilterConfig,
    integrator: &IntegratorConfig,
) -> Result<FilterSummary> {
    schedule.check_against(system)?;
    if measurements.len() != schedule.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} measurement rows for {} observation times",
            measurements.len(),
            schedule.len()
        )));
    }
    if cfg.theta_dim() != 1 {
        return invalid(format!(
            "the system has one loading vector but the filter tracks {} parameters",
            cfg.theta_dim()
        ));
    }
    let mut ensemble = init_ensemble(cfg, system.dim())?;
    let times = schedule.all_times();
    let mut steps = Vec::with_capacity(times.len());
    steps.push(summarize(&ensemble, times[0]));

    let mut cache = StepperCache::new(system, *integrator);
    for (j, y) in measurements.iter().enumerate() {
        let stepper = cache.get(times[j + 1] - times[j])?;
        filter_step(&mut ensemble, stepper, y, schedule.observed(), cfg, j + 1)?;
        let summary = summarize(&ensemble, times[j + 1]);
        debug!(
            "step {} t={:.3} theta={:.4} sigma_E={:.4} ess={:.1}",
            j + 1,
            summary.time,
            summary.theta[0].mean,
            summary.drift[0].mean,
            summary.effective_sample_size
        );
        steps.push(summary);
    }
    Ok(FilterSummary { steps, final_drift: ensemble.drift, final_weights: ensemble.weights })
}
