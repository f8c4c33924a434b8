//! Experiment configuration: a TOML file with `problem`, `mesh`,
//! `observation`, `filter` and `integrator` blocks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tvpf_core::filter::{multiplicative_prior, FilterConfig, Resampler, UniformRange};
use tvpf_core::integrate::IntegratorConfig;
use tvpf_core::mesh::LinearOdeSystem;
use tvpf_core::models::{InitialCondition, ProblemKind, ProblemSpec, SourceProfile, ThetaTruth};
use tvpf_core::synth::ObservationSchedule;

use crate::error::CliError;

pub const ADVECTION_LOGISTIC: &str = include_str!("../configs/advection_logistic.toml");
pub const HEAT_SINE: &str = include_str!("../configs/heat_sine.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub problem: ProblemBlock,
    pub mesh: MeshBlock,
    pub observation: ObservationBlock,
    pub filter: FilterBlock,
    #[serde(default)]
    pub integrator: IntegratorBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Advection,
    Heat,
}

impl Kind {
    /// Probe locations for trajectory scoring.
    pub fn default_probes(self) -> Vec<f64> {
        match self {
            Kind::Advection => vec![2.0, 3.3],
            Kind::Heat => vec![0.5, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub kind: Kind,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T_final")]
    pub t_final: f64,
    /// Advection velocity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Heat diffusivity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `logistic`, `sine` or `constant`.
    pub theta_truth: String,
    #[serde(default)]
    pub theta_params: BTreeMap<String, f64>,
    /// `gaussian`, `quadratic` or `zero`.
    pub initial_condition: String,
    #[serde(default)]
    pub initial_params: BTreeMap<String, f64>,
    /// Gaussian source centre and width (heat only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    #[serde(rename = "M")]
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRule {
    /// `noise_fraction` times the mean per-node temporal std of the truth.
    Calibrate,
    /// Use `sigma_noise` as given.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationBlock {
    pub x: Vec<f64>,
    pub dt_obs: f64,
    pub noise_rule: NoiseRule,
    #[serde(default = "default_noise_fraction")]
    pub noise_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_noise: Option<f64>,
}

fn default_noise_fraction() -> f64 {
    tvpf_core::synth::NOISE_FRACTION
}

/// Per-component uniform prior relative to the true initial value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativePrior {
    pub lower_factor: f64,
    pub upper_factor: f64,
    /// Half-width used when the reference value is (nearly) zero.
    pub zero_halfwidth: f64,
}

impl Default for RelativePrior {
    fn default() -> Self {
        Self { lower_factor: 0.5, upper_factor: 1.25, zero_halfwidth: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResamplerName {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBlock {
    #[serde(rename = "N")]
    pub particles: usize,
    pub delta: f64,
    #[serde(rename = "sigma_C")]
    pub sigma_c: f64,
    #[serde(rename = "sigma_D")]
    pub sigma_d: f64,
    #[serde(default)]
    pub state_prior: RelativePrior,
    #[serde(default)]
    pub theta_prior: RelativePrior,
    #[serde(rename = "sigma_E_prior")]
    pub sigma_e_prior: [f64; 2],
    #[serde(default)]
    pub resampler: ResamplerName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    #[serde(rename = "K")]
    pub substeps: usize,
}

impl Default for IntegratorBlock {
    fn default() -> Self {
        Self { substeps: IntegratorConfig::default().substeps }
    }
}

fn param(map: &BTreeMap<String, f64>, block: &str, key: &str) -> Result<f64, CliError> {
    map.get(key).copied().ok_or_else(|| CliError::Validation(format!("problem.{block}: missing parameter `{key}`")))
}

fn check_keys(map: &BTreeMap<String, f64>, block: &str, allowed: &[&str]) -> Result<(), CliError> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(CliError::Validation(format!(
            "problem.{block}: unknown parameter `{k}` (expected {})",
            allowed.join(", ")
        ))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file; the bare names `advection_logistic` and
    /// `heat_sine` select the built-in experiments.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            if let Some(text) = path.to_str().and_then(canned) {
                return Self::from_toml(text);
            }
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let problem = self.problem_spec()?;
        let system = self.system()?;
        self.schedule(&system)?;
        let obs = &self.observation;
        if !(obs.noise_fraction >= 0.0) {
            return Err(CliError::Validation("observation.noise_fraction must be nonnegative".into()));
        }
        match (obs.noise_rule, obs.sigma_noise) {
            (NoiseRule::Fixed, None) => {
                return Err(CliError::Validation(
                    "observation.sigma_noise is required when noise_rule = \"fixed\"".into(),
                ))
            }
            (NoiseRule::Fixed, Some(s)) if !(s >= 0.0) => {
                return Err(CliError::Validation(format!("observation.sigma_noise must be nonnegative, got {s}")))
            }
            (NoiseRule::Calibrate, Some(_)) => {
                return Err(CliError::Validation(
                    "observation.sigma_noise conflicts with noise_rule = \"calibrate\"".into(),
                ))
            }
            _ => {}
        }
        self.integrator_config().validate().map_err(|e| CliError::Validation(format!("integrator.K: {e}")))?;
        let u0 = problem.initial_state(&system);
        self.filter_config(&u0, problem.theta.eval(0.0))
            .validate(system.dim())
            .map_err(|e| CliError::Validation(format!("filter: {e}")))?;
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        let p = &self.problem;
        let (kind, coefficient) = match (p.kind, p.v, p.alpha) {
            (Kind::Advection, Some(v), None) => (ProblemKind::Advection, v),
            (Kind::Heat, None, Some(a)) => (ProblemKind::Heat, a),
            (Kind::Advection, _, _) => {
                return Err(CliError::Validation("problem: advection needs `v` and no `alpha`".into()))
            }
            (Kind::Heat, _, _) => return Err(CliError::Validation("problem: heat needs `alpha` and no `v`".into())),
        };
        let tp = &p.theta_params;
        let theta = match p.theta_truth.as_str() {
            "logistic" => {
                check_keys(tp, "theta_params", &["scale", "rate", "midpoint", "offset"])?;
                ThetaTruth::Logistic {
                    scale: param(tp, "theta_params", "scale")?,
                    rate: param(tp, "theta_params", "rate")?,
                    midpoint: param(tp, "theta_params", "midpoint")?,
                    offset: param(tp, "theta_params", "offset")?,
                }
            }
            "sine" => {
                check_keys(tp, "theta_params", &["amplitude", "period", "offset"])?;
                ThetaTruth::Sine {
                    amplitude: param(tp, "theta_params", "amplitude")?,
                    period: param(tp, "theta_params", "period")?,
                    offset: param(tp, "theta_params", "offset")?,
                }
            }
            "constant" => {
                check_keys(tp, "theta_params", &["value"])?;
                ThetaTruth::Constant { value: param(tp, "theta_params", "value")? }
            }
            other => {
                return Err(CliError::Validation(format!(
                    "problem.theta_truth: unknown `{other}` (expected logistic, sine or constant)"
                )))
            }
        };
        let ip = &p.initial_params;
        let initial = match p.initial_condition.as_str() {
            "gaussian" => {
                check_keys(ip, "initial_params", &["mu", "gamma"])?;
                InitialCondition::Gaussian {
                    mu: param(ip, "initial_params", "mu")?,
                    gamma: param(ip, "initial_params", "gamma")?,
                }
            }
            "quadratic" => {
                check_keys(ip, "initial_params", &["linear", "quadratic"])?;
                InitialCondition::Quadratic {
                    linear: param(ip, "initial_params", "linear")?,
                    quadratic: param(ip, "initial_params", "quadratic")?,
                }
            }
            "zero" => {
                check_keys(ip, "initial_params", &[])?;
                InitialCondition::Zero
            }
            other => {
                return Err(CliError::Validation(format!(
                    "problem.initial_condition: unknown `{other}` (expected gaussian, quadratic or zero)"
                )))
            }
        };
        let source = match (kind, p.source_mu, p.source_gamma) {
            (ProblemKind::Advection, None, None) => SourceProfile::Uniform,
            (ProblemKind::Advection, _, _) => {
                return Err(CliError::Validation("problem: advection takes no source_mu/source_gamma".into()))
            }
            (ProblemKind::Heat, Some(mu), Some(gamma)) => SourceProfile::Gaussian { mu, gamma },
            (ProblemKind::Heat, _, _) => {
                return Err(CliError::Validation("problem: heat needs source_mu and source_gamma".into()))
            }
        };
        let spec = ProblemSpec { kind, length: p.length, t_final: p.t_final, coefficient, initial, source, theta };
        spec.validate().map_err(|e| CliError::Validation(format!("problem: {e}")))?;
        Ok(spec)
    }

    pub fn system(&self) -> Result<LinearOdeSystem, CliError> {
        self.problem_spec()?.discretize(self.mesh.intervals).map_err(|e| CliError::Validation(format!("mesh: {e}")))
    }

    pub fn schedule(&self, system: &LinearOdeSystem) -> Result<ObservationSchedule, CliError> {
        ObservationSchedule::uniform(system, &self.observation.x, self.observation.dt_obs, self.problem.t_final)
            .map_err(|e| CliError::Validation(format!("observation: {e}")))
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig::with_substeps(self.integrator.substeps)
    }

    /// Filter settings with priors placed relative to the true initial state
    /// and source amplitude.
    pub fn filter_config(&self, initial_state: &[f64], initial_theta: f64) -> FilterConfig {
        let f = &self.filter;
        let sp = f.state_prior;
        let tp = f.theta_prior;
        FilterConfig {
            particles: f.particles,
            delta: f.delta,
            sigma_c: f.sigma_c,
            sigma_d: f.sigma_d,
            state_prior: multiplicative_prior(initial_state, sp.lower_factor, sp.upper_factor, sp.zero_halfwidth),
            theta_prior: multiplicative_prior(&[initial_theta], tp.lower_factor, tp.upper_factor, tp.zero_halfwidth),
            drift_prior: UniformRange::new(f.sigma_e_prior[0], f.sigma_e_prior[1]),
            seed: self.seed,
            resampler: match f.resampler {
                ResamplerName::Multinomial => Resampler::Multinomial,
                ResamplerName::Systematic => Resampler::Systematic,
            },
        }
    }

    /// Hash over every block that determines the simulated data (the filter
    /// block and output directory are excluded).
    pub fn data_hash(&self) -> String {
        #[derive(Serialize)]
        struct DataKey<'a> {
            seed: u64,
            problem: &'a ProblemBlock,
            mesh: &'a MeshBlock,
            observation: &'a ObservationBlock,
            integrator: &'a IntegratorBlock,
        }
        let key = DataKey {
            seed: self.seed,
            problem: &self.problem,
            mesh: &self.mesh,
            observation: &self.observation,
            integrator: &self.integrator,
        };
        let text = toml::to_string(&key).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn canned(name: &str) -> Option<&'static str> {
    match name {
        "advection_logistic" => Some(ADVECTION_LOGISTIC),
        "heat_sine" => Some(HEAT_SINE),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_configs_reproduce_constants() {
        let adv = ExperimentConfig::from_toml(ADVECTION_LOGISTIC).unwrap();
        assert_eq!(adv.problem.kind, Kind::Advection);
        assert_eq!((adv.problem.length, adv.problem.t_final, adv.problem.v), (5.0, 15.0, Some(0.2)));
        assert_eq!(adv.mesh.intervals, 50);
        assert_eq!(adv.observation.dt_obs, 0.05);
        assert_eq!(adv.observation.x.len(), 25);
        assert!((adv.observation.x[24] - 4.9).abs() < 1e-12);
        assert_eq!((adv.filter.sigma_c, adv.filter.sigma_d), (0.1, 0.75));
        let spec = adv.problem_spec().unwrap();
        assert_eq!(spec, ProblemSpec::advection_logistic());

        let heat = ExperimentConfig::from_toml(HEAT_SINE).unwrap();
        assert_eq!((heat.problem.length, heat.problem.t_final, heat.problem.alpha), (3.0, 50.0, Some(0.2)));
        assert_eq!((heat.problem.source_mu, heat.problem.source_gamma), (Some(1.5), Some(1.0)));
        assert_eq!(heat.mesh.intervals, 30);
        assert_eq!(heat.observation.dt_obs, 0.1);
        assert_eq!(heat.observation.x.len(), 8);
        assert_eq!((heat.filter.sigma_c, heat.filter.sigma_d), (0.1, 1.5));
        assert_eq!(heat.problem_spec().unwrap(), ProblemSpec::heat_sine());

        for cfg in [&adv, &heat] {
            assert_eq!(cfg.filter.particles, 1000);
            assert_eq!(cfg.filter.delta, 0.96);
            assert_eq!(cfg.filter.sigma_e_prior, [0.05, 10.0]);
            assert_eq!(cfg.observation.noise_rule, NoiseRule::Calibrate);
            assert_eq!(cfg.observation.noise_fraction, 0.2);
        }
    }

    #[test]
    fn round_trip() {
        for text in [ADVECTION_LOGISTIC, HEAT_SINE] {
            let a = ExperimentConfig::from_toml(text).unwrap();
            let b = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_toml(), b.to_toml());
            assert_eq!(a.data_hash(), b.data_hash());
        }
    }

    #[test]
    fn hash_ignores_filter_block() {
        let a = ExperimentConfig::from_toml(ADVECTION_LOGISTIC).unwrap();
        let mut b = a.clone();
        b.filter.particles = 10;
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.data_hash(), b.data_hash());
        b.seed += 1;
        assert_ne!(a.data_hash(), b.data_hash());
    }

    fn expect_error(edit: impl Fn(&mut toml::Table), needle: &str) {
        let mut table: toml::Table = toml::from_str(HEAT_SINE).unwrap();
        edit(&mut table);
        let err = ExperimentConfig::from_toml(&toml::to_string(&table).unwrap()).unwrap_err();
        assert!(err.to_string().contains(needle), "{err} does not mention {needle}");
    }

    fn block<'a>(t: &'a mut toml::Table, name: &str) -> &'a mut toml::Table {
        t.get_mut(name).unwrap().as_table_mut().unwrap()
    }

    #[test]
    fn field_level_errors() {
        expect_error(
            |t| {
                block(t, "observation").insert("x".into(), toml::Value::Array(vec![0.15.into()]));
            },
            "observation",
        );
        expect_error(
            |t| {
                block(t, "observation").insert("x".into(), toml::Value::Array(vec![0.0.into()]));
            },
            "Dirichlet",
        );
        expect_error(
            |t| {
                block(t, "filter").insert("delta".into(), 0.2.into());
            },
            "discount",
        );
        expect_error(
            |t| {
                block(t, "filter").insert("N".into(), 0.into());
            },
            "particle",
        );
        expect_error(
            |t| {
                block(t, "problem").insert("theta_truth".into(), "cubic".into());
            },
            "theta_truth",
        );
        expect_error(
            |t| {
                block(t, "problem").insert("v".into(), 0.3.into());
            },
            "alpha",
        );
        expect_error(
            |t| {
                block(t, "problem").insert("bogus".into(), 0.3.into());
            },
            "bogus",
        );
        expect_error(
            |t| {
                block(t, "integrator").insert("K".into(), 0.into());
            },
            "integrator",
        );
        expect_error(
            |t| {
                block(t, "observation").insert("noise_rule".into(), "fixed".into());
            },
            "sigma_noise",
        );
        expect_error(
            |t| {
                block(t, "mesh").insert("M".into(), 1.into());
            },
            "mesh",
        );
        expect_error(
            |t| {
                block(t, "problem").get_mut("theta_params").unwrap().as_table_mut().unwrap().remove("period");
            },
            "period",
        );
    }
}
