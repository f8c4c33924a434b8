//! The two benchmark problems: periodic advection with a spatially uniform
//! logistic source, and Dirichlet heat conduction with a Gaussian source of
//! sinusoidal amplitude.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::mesh::{assemble_advection, assemble_heat, LinearOdeSystem, SpatialMesh};

pub fn theta_logistic(t: f64) -> f64 {
    2.0 / (1.0 + (-0.5 * (t - 7.5)).exp()) + 0.1
}

pub fn theta_sine(t: f64) -> f64 {
    0.5 * (PI / 6.0 * t).sin() + 0.5
}

pub fn initial_advection(x: f64) -> f64 {
    (-(x - 2.0) * (x - 2.0) / 0.25).exp()
}

pub fn initial_heat(x: f64) -> f64 {
    3.0 * x - x * x
}

/// `exp(-(x - mu)^2 / gamma^2)`.
pub fn gaussian_source_profile(x: f64, mu: f64, gamma: f64) -> Result<f64> {
    if gamma == 0.0 || !gamma.is_finite() {
        return invalid(format!("Gaussian width must be nonzero, got {gamma}"));
    }
    Ok((-(x - mu) * (x - mu) / (gamma * gamma)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Advection,
    Heat,
}

/// Ground-truth source amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaTruth {
    /// `scale / (1 + exp(-rate (t - midpoint))) + offset`.
    Logistic {
        scale: f64,
        rate: f64,
        midpoint: f64,
        offset: f64,
    },
    /// `amplitude sin(2 pi t / period) + offset`.
    Sine {
        amplitude: f64,
        period: f64,
        offset: f64,
    },
    Constant {
        value: f64,
    },
}

impl ThetaTruth {
    pub const LOGISTIC_EXAMPLE: Self = Self::Logistic { scale: 2.0, rate: 0.5, midpoint: 7.5, offset: 0.1 };
    pub const SINE_EXAMPLE: Self = Self::Sine { amplitude: 0.5, period: 12.0, offset: 0.5 };

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ThetaTruth::Logistic { scale, rate, midpoint, offset } => {
                scale / (1.0 + (-rate * (t - midpoint)).exp()) + offset
            }
            ThetaTruth::Sine { amplitude, period, offset } => amplitude * (2.0 * PI * t / period).sin() + offset,
            ThetaTruth::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ThetaTruth::Sine { period, .. } if !(period > 0.0) => {
                invalid(format!("sine period must be positive, got {period}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// `exp(-(x - mu)^2 / gamma^2)`.
    Gaussian {
        mu: f64,
        gamma: f64,
    },
    /// `linear x + quadratic x^2`.
    Quadratic {
        linear: f64,
        quadratic: f64,
    },
    Zero,
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Gaussian { mu, gamma } => (-(x - mu) * (x - mu) / (gamma * gamma)).exp(),
            InitialCondition::Quadratic { linear, quadratic } => linear * x + quadratic * x * x,
            InitialCondition::Zero => 0.0,
        }
    }
}

/// Spatial factor `s(x)` of a separable source `theta(t) s(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceProfile {
    Uniform,
    Gaussian { mu: f64, gamma: f64 },
}

impl SourceProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SourceProfile::Uniform => 1.0,
            SourceProfile::Gaussian { mu, gamma } => (-(x - mu) * (x - mu) / (gamma * gamma)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub length: f64,
    pub t_final: f64,
    /// Velocity `v` for advection, diffusivity `alpha` for heat.
    pub coefficient: f64,
    pub initial: InitialCondition,
    pub source: SourceProfile,
    pub theta: ThetaTruth,
}

impl ProblemSpec {
    pub fn advection_logistic() -> Self {
        Self {
            kind: ProblemKind::Advection,
            length: 5.0,
            t_final: 15.0,
            coefficient: 0.2,
            initial: InitialCondition::Gaussian { mu: 2.0, gamma: 0.5 },
            source: SourceProfile::Uniform,
            theta: ThetaTruth::LOGISTIC_EXAMPLE,
        }
    }

    pub fn heat_sine() -> Self {
        Self {
            kind: ProblemKind::Heat,
            length: 3.0,
            t_final: 50.0,
            coefficient: 0.2,
            initial: InitialCondition::Quadratic { linear: 3.0, quadratic: -1.0 },
            source: SourceProfile::Gaussian { mu: 1.5, gamma: 1.0 },
            theta: ThetaTruth::SINE_EXAMPLE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return invalid(format!("domain length must be positive, got {}", self.length));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return invalid(format!("final time must be positive, got {}", self.t_final));
        }
        if let SourceProfile::Gaussian { gamma, .. } = self.source {
            if gamma == 0.0 {
                return invalid("source width gamma must be nonzero");
            }
        }
        if let InitialCondition::Gaussian { gamma, .. } = self.initial {
            if gamma == 0.0 {
                return invalid("initial-condition width gamma must be nonzero");
            }
        }
        self.theta.validate()?;
        match self.kind {
            ProblemKind::Advection => {
                if self.source != SourceProfile::Uniform {
                    return invalid("the advection problem takes a spatially uniform source");
                }
            }
            ProblemKind::Heat => {
                if !(self.coefficient > 0.0) {
                    return invalid(format!("diffusivity must be positive, got {}", self.coefficient));
                }
                let scale = 1e-12 * (1.0 + self.length * self.length);
                let (left, right) = (self.initial.eval(0.0), self.initial.eval(self.length));
                if left.abs() > scale || right.abs() > scale {
                    return invalid(format!(
                        "initial condition must vanish at both Dirichlet ends, got {left} and {right}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Semi-discrete system on an `intervals`-interval mesh of the domain.
    pub fn discretize(&self, intervals: usize) -> Result<LinearOdeSystem> {
        self.validate()?;
        let mesh = SpatialMesh::new(self.length, intervals)?;
        match self.kind {
            ProblemKind::Advection => assemble_advection(&mesh, self.coefficient),
            ProblemKind::Heat => {
                let source = self.source;
                assemble_heat(&mesh, self.coefficient, move |x| source.eval(x))
            }
        }
    }

    pub fn initial_state(&self, system: &LinearOdeSystem) -> Vec<f64> {
        system.sample_states(|x| self.initial.eval(x))
    }
}
