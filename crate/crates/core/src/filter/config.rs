use crate::error::{invalid, Result};

/// Lower bound enforced on jittered drift coefficients by reflection.
pub const DRIFT_FLOOR: f64 = 1e-6;

/// Closed interval for a uniform prior; `lower == upper` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformRange {
    pub lower: f64,
    pub upper: f64,
}

impl UniformRange {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn point(value: f64) -> Self {
        Self { lower: value, upper: value }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !self.lower.is_finite() || !self.upper.is_finite() || self.lower > self.upper {
            return invalid(format!("{what}: invalid range [{}, {}]", self.lower, self.upper));
        }
        Ok(())
    }

    /// Maps `u` in `[0, 1)` onto the range.
    pub fn at(&self, u: f64) -> f64 {
        self.lower + (self.upper - self.lower) * u
    }
}

/// Per-component prior spanning `lower_factor..upper_factor` times a
/// reference value. Zero references get the symmetric range
/// `[-zero_halfwidth, zero_halfwidth]` instead.
pub fn multiplicative_prior(
    reference: &[f64],
    lower_factor: f64,
    upper_factor: f64,
    zero_halfwidth: f64,
) -> Vec<UniformRange> {
    reference
        .iter()
        .map(|&c| {
            if c == 0.0 {
                UniformRange::new(-zero_halfwidth, zero_halfwidth)
            } else {
                let (a, b) = (lower_factor * c, upper_factor * c);
                UniformRange::new(a.min(b), a.max(b))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampler {
    /// Independent draws with replacement from the fitness probabilities.
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub particles: usize,
    /// Liu-West discount factor in `(1/3, 1)`.
    pub delta: f64,
    /// State innovation standard deviation.
    pub sigma_c: f64,
    /// Observation noise standard deviation assumed by the likelihood.
    pub sigma_d: f64,
    pub state_prior: Vec<UniformRange>,
    /// One range per source parameter; its length fixes the parameter dimension.
    pub theta_prior: Vec<UniformRange>,
    /// Prior for every drift coefficient component.
    pub drift_prior: UniformRange,
    pub seed: u64,
    pub resampler: Resampler,
}

impl FilterConfig {
    pub fn theta_dim(&self) -> usize {
        self.theta_prior.len()
    }

    /// Shrinkage factor `a = (3 delta - 1) / (2 delta)`.
    pub fn shrink_factor(&self) -> f64 {
        shrink_factor(self.delta)
    }

    /// Jitter variance scale `r^2 = 1 - a^2`.
    pub fn jitter_scale(&self) -> f64 {
        let a = self.shrink_factor();
        1.0 - a * a
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.particles == 0 {
            return invalid(format!("need at least one particle, got {}", self.particles));
        }
        if !(self.delta > 1.0 / 3.0 && self.delta < 1.0) {
            return invalid(format!("discount factor must lie in (1/3, 1), got {}", self.delta));
        }
        if !(self.sigma_c >= 0.0) || !self.sigma_c.is_finite() {
            return invalid(format!("state innovation std must be nonnegative, got {}", self.sigma_c));
        }
        if !(self.sigma_d > 0.0) || !self.sigma_d.is_finite() {
            return invalid(format!("observation std must be positive, got {}", self.sigma_d));
        }
        if self.state_prior.len() != state_dim {
            return invalid(format!("state prior has {} components, system has {state_dim}", self.state_prior.len()));
        }
        if self.theta_prior.is_empty() {
            return invalid("theta prior must have at least one component");
        }
        for r in &self.state_prior {
            r.validate("state prior")?;
        }
        for r in &self.theta_prior {
            r.validate("theta prior")?;
        }
        self.drift_prior.validate("drift prior")?;
        if self.drift_prior.lower < 0.0 {
            return invalid("drift coefficient prior must be nonnegative");
        }
        Ok(())
    }
}

pub fn shrink_factor(delta: f64) -> f64 {
    (3.0 * delta - 1.0) / (2.0 * delta)
}
