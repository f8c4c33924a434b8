//! Ground-truth simulation and synthetic noisy observations.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::integrate::{IntegratorConfig, Stepper};
use crate::mesh::LinearOdeSystem;
use crate::models::ProblemSpec;
use crate::rng::{substream, Purpose};

/// Noise level as a fraction of the mean per-node temporal standard deviation.
pub const NOISE_FRACTION: f64 = 0.2;

/// Which state components are observed, and when.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSchedule {
    observed: Vec<usize>,
    start: f64,
    times: Vec<f64>,
}

impl ObservationSchedule {
    /// `observed` are state indices; `times` are the observation times
    /// `t_1 < ... < t_J`, all after `start`.
    pub fn new(observed: Vec<usize>, start: f64, times: Vec<f64>) -> Result<Self> {
        if observed.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("observed state indices must be strictly increasing");
        }
        let mut prev = start;
        for &t in &times {
            if !(t > prev) || !t.is_finite() {
                return invalid(format!("observation times must increase strictly from {start}"));
            }
            prev = t;
        }
        Ok(Self { observed, start, times })
    }

    /// Observes the mesh nodes at `xs` every `interval` time units from 0 up
    /// to `t_final`.
    pub fn uniform(system: &LinearOdeSystem, xs: &[f64], interval: f64, t_final: f64) -> Result<Self> {
        if !(interval > 0.0) || !(t_final > 0.0) {
            return invalid("observation interval and horizon must be positive");
        }
        let count = (t_final / interval).round();
        if (count * interval - t_final).abs() > 1e-9 * t_final || count < 1.0 {
            return invalid(format!("horizon {t_final} is not a whole number of observation intervals {interval}"));
        }
        let observed = xs.iter().map(|&x| system.state_of_x(x)).collect::<Result<Vec<_>>>()?;
        if observed.iter().any(|&k| k >= system.dim()) {
            return invalid("observed index outside the state");
        }
        let times = (1..=count as usize).map(|j| j as f64 * interval).collect();
        Self::new(observed, 0.0, times)
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `start` followed by every observation time.
    pub fn all_times(&self) -> Vec<f64> {
        std::iter::once(self.start).chain(self.times.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn check_against(&self, system: &LinearOdeSystem) -> Result<()> {
        if let Some(&k) = self.observed.iter().find(|&&k| k >= system.dim()) {
            return invalid(format!("observed index {k} outside a {}-state system", system.dim()));
        }
        Ok(())
    }
}

/// Truth trajectory sampled at the schedule's start and observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// `(J + 1) x d`.
    pub states: Vec<Vec<f64>>,
    /// `J + 1` values of the true source amplitude.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schedule: ObservationSchedule,
    /// `J x m`.
    pub measurements: Vec<Vec<f64>>,
    pub sigma_noise: f64,
    /// Scoring only; never read by the filter.
    pub truth: Truth,
}

/// Reuses the previous stepper when consecutive intervals have equal length.
pub(crate) struct StepperCache<'a> {
    system: &'a LinearOdeSystem,
    cfg: IntegratorConfig,
    current: Option<Stepper<'a>>,
}

impl<'a> StepperCache<'a> {
    pub(crate) fn new(system: &'a LinearOdeSystem, cfg: IntegratorConfig) -> Self {
        Self { system, cfg, current: None }
    }

    pub(crate) fn get(&mut self, interval: f64) -> Result<&Stepper<'a>> {
        let stale = match &self.current {
            Some(s) => (s.interval() - interval).abs() > 1e-12 * interval,
            None => true,
        };
        if stale {
            self.current = Some(Stepper::new(self.system, interval, &self.cfg)?);
        }
        Ok(self.current.as_ref().unwrap())
    }
}

/// Simulates the true states from the problem's initial condition with the
/// true, time-varying source amplitude.
pub fn simulate_truth(
    problem: &ProblemSpec,
    system: &LinearOdeSystem,
    cfg: &IntegratorConfig,
    schedule: &ObservationSchedule,
) -> Result<Truth> {
    problem.validate()?;
    let times = schedule.all_times();
    let mut state = problem.initial_state(system);
    let mut states = Vec::with_capacity(times.len());
    states.push(state.clone());
    let mut cache = StepperCache::new(system, *cfg);
    let mut scratch = Vec::new();
    for w in times.windows(2) {
        let stepper = cache.get(w[1] - w[0])?;
        stepper.advance_varying(&mut state, w[0], |t| problem.theta.eval(t), &mut scratch);
        states.push(state.clone());
    }
    let theta = times.iter().map(|&t| problem.theta.eval(t)).collect();
    Ok(Truth { states, theta })
}

/// `fraction` times the mean, over state components, of the population
/// standard deviation of each component's trajectory.
pub fn calibrate_noise_fraction(states: &[Vec<f64>], fraction: f64) -> Result<f64> {
    if states.len() < 2 {
        return invalid(format!("noise calibration needs at least 2 time samples, got {}", states.len()));
    }
    let d = states[0].len();
    if d == 0 || states.iter().any(|s| s.len() != d) {
        return Err(Error::ShapeMismatch("ragged or empty truth states".into()));
    }
    let n = states.len() as f64;
    let mean_std = (0..d)
        .map(|k| {
            let mean = states.iter().map(|s| s[k]).sum::<f64>() / n;
            let var = states.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / n;
            var.sqrt()
        })
        .sum::<f64>()
        / d as f64;
    Ok(fraction * mean_std)
}

pub fn calibrate_noise(states: &[Vec<f64>]) -> Result<f64> {
    calibrate_noise_fraction(states, NOISE_FRACTION)
}

/// Observed truth components plus i.i.d. `N(0, sigma_noise^2)` noise,
/// deterministic in `seed`.
pub fn generate_observations(
    truth: Truth,
    schedule: ObservationSchedule,
    sigma_noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(sigma_noise >= 0.0) || !sigma_noise.is_finite() {
        return invalid(format!("noise level must be nonnegative, got {sigma_noise}"));
    }
    if truth.states.len() != schedule.len() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} truth states for {} observation times",
            truth.states.len(),
            schedule.len()
        )));
    }
    let measurements = truth.states[1..]
        .iter()
        .enumerate()
        .map(|(j, state)| {
            let mut rng = substream(seed, j as u64 + 1, 0, Purpose::Observation);
            schedule
                .observed()
                .iter()
                .map(|&k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    state[k] + sigma_noise * z
                })
                .collect()
        })
        .collect();
    Ok(Dataset { schedule, measurements, sigma_noise, truth })
}
