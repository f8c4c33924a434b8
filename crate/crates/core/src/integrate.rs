//! Implicit trapezoidal (Crank-Nicolson) propagation of a [`LinearOdeSystem`]
//! across one observation interval.

use crate::banded::{BandedMatrix, BandedSolver};
use crate::error::{invalid, Result};
use crate::mesh::LinearOdeSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImplicitTrapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegratorConfig {
    /// Fixed substeps per observation interval.
    pub substeps: usize,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { substeps: 4, scheme: Scheme::ImplicitTrapezoidal }
    }
}

impl IntegratorConfig {
    pub fn with_substeps(substeps: usize) -> Self {
        Self { substeps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return invalid("integrator needs at least one substep per interval");
        }
        Ok(())
    }
}

/// Prefactored trapezoidal map over an interval of fixed length.
///
/// Each substep solves `(I - dt/2 A) u' = (I + dt/2 A) u + dt theta b`. The
/// factorization depends only on `A` and `dt`, so one stepper serves every
/// particle of a filter step and can be shared across threads.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    system: &'a LinearOdeSystem,
    interval: f64,
    substeps: usize,
    dt: f64,
    explicit: BandedMatrix,
    implicit: BandedSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a LinearOdeSystem, interval: f64, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if !(interval > 0.0) || !interval.is_finite() {
            return invalid(format!("step interval must be positive, got {interval}"));
        }
        let dt = interval / cfg.substeps as f64;
        let half = 0.5 * dt;
        let explicit = system.matrix().shifted(1.0, half);
        let implicit = system.matrix().shifted(1.0, -half).factor()?;
        Ok(Self { system, interval, substeps: cfg.substeps, dt, explicit, implicit })
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn substep(&self) -> f64 {
        self.dt
    }

    pub fn system(&self) -> &LinearOdeSystem {
        self.system
    }

    fn substep_in_place(&self, u: &mut [f64], theta: f64, scratch: &mut [f64]) {
        self.explicit.matvec(u, scratch);
        let scale = self.dt * theta;
        for ((s, b), out) in scratch.iter().zip(self.system.loading()).zip(u.iter_mut()) {
            *out = s + scale * b;
        }
        self.implicit.solve_in_place(u);
    }

    /// Advances `u` across the interval with `theta` held fixed.
    pub fn advance(&self, u: &mut [f64], theta: f64, scratch: &mut Vec<f64>) {
        scratch.resize(u.len(), 0.0);
        for _ in 0..self.substeps {
            self.substep_in_place(u, theta, scratch);
        }
    }

    /// Advances `u` from `t0` with the source amplitude sampled at each
    /// substep midpoint.
    pub fn advance_varying(&self, u: &mut [f64], t0: f64, theta: impl Fn(f64) -> f64, scratch: &mut Vec<f64>) {
        scratch.resize(u.len(), 0.0);
        for k in 0..self.substeps {
            let mid = t0 + (k as f64 + 0.5) * self.dt;
            self.substep_in_place(u, theta(mid), scratch);
        }
    }
}

fn check_inputs(system: &LinearOdeSystem, u: &[f64], t0: f64, t1: f64) -> Result<()> {
    if u.len() != system.dim() {
        return Err(crate::Error::ShapeMismatch(format!(
            "state has {} components, system has {}",
            u.len(),
            system.dim()
        )));
    }
    if !(t1 > t0) {
        return invalid(format!("need t1 > t0, got [{t0}, {t1}]"));
    }
    Ok(())
}

/// Trapezoidal approximation of `u(t1)` for `du/dt = A u + theta b` from `u(t0) = u`.
pub fn step_constant_theta(
    system: &LinearOdeSystem,
    u: &[f64],
    theta: f64,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    check_inputs(system, u, t0, t1)?;
    let stepper = Stepper::new(system, t1 - t0, cfg)?;
    let mut out = u.to_vec();
    stepper.advance(&mut out, theta, &mut Vec::new());
    Ok(out)
}

/// As [`step_constant_theta`] but with a time-dependent source amplitude,
/// sampled at substep midpoints.
pub fn step_varying_theta(
    system: &LinearOdeSystem,
    u: &[f64],
    theta: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    check_inputs(system, u, t0, t1)?;
    let stepper = Stepper::new(system, t1 - t0, cfg)?;
    let mut out = u.to_vec();
    stepper.advance_varying(&mut out, t0, theta, &mut Vec::new());
    Ok(out)
}
