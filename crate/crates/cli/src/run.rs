//! The `simulate`, `estimate` and `report` commands.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use tvpf_core::filter::{run_filter, FilterSummary};
use tvpf_core::stats::{coverage, rmse, weighted_histogram, Band, WeightedSample};
use tvpf_core::synth::{calibrate_noise_fraction, generate_observations, simulate_truth, Dataset};

use crate::config::{ExperimentConfig, Kind, NoiseRule};
use crate::error::CliError;
use crate::io::{ensure_dir, read_json, require_dir, write_json, Table};
use crate::plot;

pub const BURN_IN_FRACTION: f64 = 0.1;
pub const HISTOGRAM_BINS: usize = 30;
const X_TOLERANCE: f64 = 1e-9;

const FIELD_HEADER: [&str; 3] = ["t", "x", "u"];
const THETA_TRUE_HEADER: [&str; 2] = ["t", "theta"];
const OBS_HEADER: [&str; 3] = ["t", "x", "y"];
const BAND_HEADER: [&str; 6] = ["t", "mean", "lo68", "hi68", "lo95", "hi95"];
const STATE_HEADER: [&str; 7] = ["t", "x", "mean", "lo68", "hi68", "lo95", "hi95"];
const POSTERIOR_HEADER: [&str; 2] = ["value", "weight"];
const DIAGNOSTICS_HEADER: [&str; 5] = ["t", "ess", "sigmaE_mean", "sigmaE_lo95", "sigmaE_hi95"];
const ERROR_HEADER: [&str; 3] = ["t", "x", "abs_error"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMeta {
    pub kind: Kind,
    pub seed: u64,
    pub sigma_noise: f64,
    pub noise_rule: NoiseRule,
    pub config_hash: String,
    pub observation_times: usize,
    pub observed_locations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub seed: u64,
    pub config_hash: String,
    pub particles: usize,
    pub steps: usize,
    pub final_effective_sample_size: f64,
}

/// Warns when an advection substep moves information further than one cell.
fn check_cfl(cfg: &ExperimentConfig) {
    if let (Kind::Advection, Some(v)) = (cfg.problem.kind, cfg.problem.v) {
        let h = cfg.problem.length / cfg.mesh.intervals as f64;
        let dt = cfg.observation.dt_obs / cfg.integrator.substeps as f64;
        let courant = v.abs() * dt / h;
        if courant > 1.0 {
            log::warn!("advection Courant number {courant:.3} exceeds 1; expect phase errors (raise integrator.K)");
        }
    }
}

/// Simulates the truth and noisy observations.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let problem = cfg.problem_spec()?;
    let system = cfg.system()?;
    let schedule = cfg.schedule(&system)?;
    check_cfl(cfg);
    let truth = simulate_truth(&problem, &system, &cfg.integrator_config(), &schedule)?;
    let sigma = match cfg.observation.noise_rule {
        // observation times only; the initial condition is excluded
        NoiseRule::Calibrate => calibrate_noise_fraction(&truth.states[1..], cfg.observation.noise_fraction)?,
        NoiseRule::Fixed => cfg.observation.sigma_noise.expect("validated"),
    };
    Ok(generate_observations(truth, schedule, sigma, cfg.seed)?)
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<DataMeta, CliError> {
    cfg.validate()?;
    let system = cfg.system()?;
    let ds = build_dataset(cfg)?;
    ensure_dir(out)?;

    let times = ds.schedule.all_times();
    let nodes = system.mesh().nodes();
    let mut truth = Table::new(&FIELD_HEADER);
    for (t, u) in times.iter().zip(&ds.truth.states) {
        for (x, v) in nodes.iter().zip(system.to_node_values(u)) {
            truth.push(vec![*t, *x, v]);
        }
    }
    truth.write(&out.join("truth.csv"))?;

    let mut theta = Table::new(&THETA_TRUE_HEADER);
    for (t, th) in times.iter().zip(&ds.truth.theta) {
        theta.push(vec![*t, *th]);
    }
    theta.write(&out.join("theta_true.csv"))?;

    let mut obs = Table::new(&OBS_HEADER);
    for (t, y) in ds.schedule.times().iter().zip(&ds.measurements) {
        for (&k, v) in ds.schedule.observed().iter().zip(y) {
            obs.push(vec![*t, system.state_x(k), *v]);
        }
    }
    obs.write(&out.join("observations.csv"))?;

    let meta = DataMeta {
        kind: cfg.problem.kind,
        seed: cfg.seed,
        sigma_noise: ds.sigma_noise,
        noise_rule: cfg.observation.noise_rule,
        config_hash: cfg.data_hash(),
        observation_times: ds.schedule.len(),
        observed_locations: ds.schedule.observed().len(),
    };
    write_json(&out.join("meta.json"), &meta)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    log::info!("simulated {} observation times, sigma_noise = {}", meta.observation_times, meta.sigma_noise);
    Ok(meta)
}

/// Reads `observations.csv` back into a `J x m` matrix, checking that it
/// follows the configured schedule.
fn read_measurements(cfg: &ExperimentConfig, data: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let system = cfg.system()?;
    let schedule = cfg.schedule(&system)?;
    let table = Table::read(&data.join("observations.csv"), &OBS_HEADER)?;
    let m = schedule.observed().len();
    if table.rows.len() != schedule.len() * m {
        return Err(CliError::Data(format!(
            "observations.csv has {} rows, expected {} times x {} locations",
            table.rows.len(),
            schedule.len(),
            m
        )));
    }
    let mut measurements = Vec::with_capacity(schedule.len());
    for (j, chunk) in table.rows.chunks(m).enumerate() {
        let t = schedule.times()[j];
        for (row, &k) in chunk.iter().zip(schedule.observed()) {
            let x = system.state_x(k);
            if (row[0] - t).abs() > 1e-9 * t.abs().max(1.0) || (row[1] - x).abs() > X_TOLERANCE {
                return Err(CliError::Data(format!(
                    "observations.csv row ({}, {}) does not match schedule point ({t}, {x})",
                    row[0], row[1]
                )));
            }
        }
        measurements.push(chunk.iter().map(|r| r[2]).collect());
    }
    Ok(measurements)
}

pub fn run_estimate(cfg: &ExperimentConfig, data: &Path, allow_mismatch: bool) -> Result<FilterSummary, CliError> {
    cfg.validate()?;
    require_dir(data, "data")?;
    let meta: DataMeta = read_json(&data.join("meta.json"))?;
    let hash = cfg.data_hash();
    if meta.config_hash != hash {
        if allow_mismatch {
            log::warn!("data was generated from a different configuration; continuing");
        } else {
            return Err(CliError::Validation(format!(
                "data hash {} does not match config hash {hash}; rerun simulate or pass --allow-mismatch",
                meta.config_hash
            )));
        }
    }
    let problem = cfg.problem_spec()?;
    let system = cfg.system()?;
    let schedule = cfg.schedule(&system)?;
    check_cfl(cfg);
    let measurements = read_measurements(cfg, data)?;
    let fcfg = cfg.filter_config(&problem.initial_state(&system), problem.theta.eval(schedule.start()));
    Ok(run_filter(&system, &schedule, &measurements, &fcfg, &cfg.integrator_config())?)
}

pub fn estimate(
    cfg: &ExperimentConfig,
    data: &Path,
    out: &Path,
    allow_mismatch: bool,
) -> Result<EstimateMeta, CliError> {
    let summary = run_estimate(cfg, data, allow_mismatch)?;
    let system = cfg.system()?;
    ensure_dir(out)?;

    let band_row = |t: f64, b: &Band| vec![t, b.mean, b.lo68, b.hi68, b.lo95, b.hi95];
    let mut theta = Table::new(&BAND_HEADER);
    let mut states = Table::new(&STATE_HEADER);
    let mut field = Table::new(&FIELD_HEADER);
    let mut diag = Table::new(&DIAGNOSTICS_HEADER);
    for step in &summary.steps {
        theta.push(band_row(step.time, &step.theta[0]));
        for (k, b) in step.states.iter().enumerate() {
            states.push(vec![step.time, system.state_x(k), b.mean, b.lo68, b.hi68, b.lo95, b.hi95]);
        }
        let means: Vec<f64> = step.states.iter().map(|b| b.mean).collect();
        for (x, v) in system.mesh().nodes().iter().zip(system.to_node_values(&means)) {
            field.push(vec![step.time, *x, v]);
        }
        let e = &step.drift[0];
        diag.push(vec![step.time, step.effective_sample_size, e.mean, e.lo95, e.hi95]);
    }
    theta.write(&out.join("estimate_theta.csv"))?;
    states.write(&out.join("estimate_states.csv"))?;
    field.write(&out.join("estimate_field.csv"))?;
    diag.write(&out.join("diagnostics.csv"))?;

    let mut posterior = Table::new(&POSTERIOR_HEADER);
    for (v, w) in summary.final_drift_component(0).into_iter().zip(&summary.final_weights) {
        posterior.push(vec![v, *w]);
    }
    posterior.write(&out.join("sigmaE_posterior.csv"))?;

    let meta = EstimateMeta {
        seed: cfg.seed,
        config_hash: cfg.data_hash(),
        particles: cfg.filter.particles,
        steps: summary.steps.len() - 1,
        final_effective_sample_size: summary.steps.last().map_or(0.0, |s| s.effective_sample_size),
    };
    write_json(&out.join("meta.json"), &meta)?;
    Ok(meta)
}

/// A long-format field on a rectangular `(t, x)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// `times.len() x xs.len()`.
    pub values: Vec<Vec<f64>>,
}

impl Field {
    pub fn from_table(table: &Table, column: usize) -> Result<Self, CliError> {
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for row in &table.rows {
            if times.last() != Some(&row[0]) {
                times.push(row[0]);
                values.push(Vec::new());
            }
            let cur = values.last_mut().unwrap();
            if times.len() == 1 {
                xs.push(row[1]);
            } else if cur.len() >= xs.len() || xs[cur.len()] != row[1] {
                return Err(CliError::Data(format!("field rows at t = {} do not repeat the x grid", row[0])));
            }
            cur.push(row[column]);
        }
        if values.iter().any(|v| v.len() != xs.len()) {
            return Err(CliError::Data("field is not rectangular".into()));
        }
        Ok(Self { times, xs, values })
    }

    pub fn column_index(&self, x: f64) -> Option<usize> {
        self.xs.iter().position(|&v| (v - x).abs() <= X_TOLERANCE)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[k]).collect()
    }
}

fn same_times(a: &[f64], b: &[f64], what: &str) -> Result<(), CliError> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0)) {
        return Err(CliError::Data(format!("{what}: time grids of data and estimate differ")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaMetrics {
    pub rmse: f64,
    pub rmse_post_burn_in: f64,
    pub coverage68_post_burn_in: f64,
    pub coverage95_post_burn_in: f64,
    pub coverage95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub x: f64,
    pub observed: bool,
    pub rmse: f64,
    pub coverage68: f64,
    pub coverage95: f64,
    pub coverage95_post_burn_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMetrics {
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub truth_rms: f64,
    /// Mean absolute error divided by the truth RMS, over state nodes.
    pub normalized_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMetrics {
    pub mean: f64,
    pub lo68: f64,
    pub hi68: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub width95: f64,
    pub histogram_edges: Vec<f64>,
    pub histogram_mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub kind: Kind,
    pub seed: u64,
    pub sigma_noise: f64,
    pub burn_in_time: f64,
    pub theta: ThetaMetrics,
    pub probes: Vec<ProbeMetrics>,
    pub field: FieldMetrics,
    pub sigma_e: PosteriorMetrics,
}

pub fn report(data: &Path, est: &Path, out: &Path, probes: Option<&[f64]>, plots: bool) -> Result<Metrics, CliError> {
    require_dir(data, "data")?;
    require_dir(est, "estimate")?;
    let meta: DataMeta = read_json(&data.join("meta.json"))?;

    let truth = Field::from_table(&Table::read(&data.join("truth.csv"), &FIELD_HEADER)?, 2)?;
    let estimate = Field::from_table(&Table::read(&est.join("estimate_field.csv"), &FIELD_HEADER)?, 2)?;
    same_times(&truth.times, &estimate.times, "field")?;
    if truth.xs != estimate.xs {
        return Err(CliError::Data("field: spatial grids of data and estimate differ".into()));
    }
    let theta_true = Table::read(&data.join("theta_true.csv"), &THETA_TRUE_HEADER)?;
    let theta_est = Table::read(&est.join("estimate_theta.csv"), &BAND_HEADER)?;
    let times = theta_est.column("t")?;
    same_times(&theta_true.column("t")?, &times, "theta")?;
    same_times(&truth.times, &times, "theta")?;
    let states_table = Table::read(&est.join("estimate_states.csv"), &STATE_HEADER)?;
    let obs = Table::read(&data.join("observations.csv"), &OBS_HEADER)?;
    let posterior = Table::read(&est.join("sigmaE_posterior.csv"), &POSTERIOR_HEADER)?;
    ensure_dir(out)?;

    let (t0, t_end) = (times[0], *times.last().unwrap());
    let burn_in_time = t0 + BURN_IN_FRACTION * (t_end - t0);
    let burn = times.iter().position(|&t| t >= burn_in_time - 1e-9).unwrap_or(times.len() - 1);

    let th = theta_true.column("theta")?;
    let mean = theta_est.column("mean")?;
    let (lo68, hi68) = (theta_est.column("lo68")?, theta_est.column("hi68")?);
    let (lo95, hi95) = (theta_est.column("lo95")?, theta_est.column("hi95")?);
    let theta = ThetaMetrics {
        rmse: rmse(&mean, &th)?,
        rmse_post_burn_in: rmse(&mean[burn..], &th[burn..])?,
        coverage68_post_burn_in: coverage(&th[burn..], &lo68[burn..], &hi68[burn..])?,
        coverage95_post_burn_in: coverage(&th[burn..], &lo95[burn..], &hi95[burn..])?,
        coverage95: coverage(&th, &lo95, &hi95)?,
    };

    let mut err_table = Table::new(&ERROR_HEADER);
    let mut errors = Vec::with_capacity(truth.times.len());
    for ((t, tr), es) in truth.times.iter().zip(&truth.values).zip(&estimate.values) {
        let row: Vec<f64> = tr.iter().zip(es).map(|(a, b)| (a - b).abs()).collect();
        for (x, e) in truth.xs.iter().zip(&row) {
            err_table.push(vec![*t, *x, *e]);
        }
        errors.push(row);
    }
    err_table.write(&out.join("error_field.csv"))?;

    let state_bands: Vec<Field> = (2..7).map(|c| Field::from_table(&states_table, c)).collect::<Result<_, _>>()?;
    let state_cols: Vec<usize> = state_bands[0]
        .xs
        .iter()
        .map(|&x| truth.column_index(x).ok_or_else(|| CliError::Data(format!("state node {x} missing from truth"))))
        .collect::<Result<_, _>>()?;
    let (mut abs_sum, mut sq_sum, mut max_abs, mut count) = (0.0, 0.0, 0.0f64, 0usize);
    for (tr, er) in truth.values.iter().zip(&errors) {
        for &k in &state_cols {
            abs_sum += er[k];
            sq_sum += tr[k] * tr[k];
            max_abs = max_abs.max(er[k]);
            count += 1;
        }
    }
    let truth_rms = (sq_sum / count as f64).sqrt();
    let mean_abs_error = abs_sum / count as f64;
    let field = FieldMetrics {
        mean_abs_error,
        max_abs_error: max_abs,
        truth_rms,
        normalized_error: if truth_rms > 0.0 { mean_abs_error / truth_rms } else { f64::NAN },
    };

    let observed: BTreeSet<u64> = obs.column("x")?.iter().map(|x| (x / X_TOLERANCE).round() as u64).collect();
    let probe_xs = probes.map(<[f64]>::to_vec).unwrap_or_else(|| meta.kind.default_probes());
    let mut probe_metrics = Vec::new();
    for &x in &probe_xs {
        let k = state_bands[0]
            .column_index(x)
            .ok_or_else(|| CliError::Validation(format!("probe x = {x} is not an estimated state node")))?;
        let kt = truth.column_index(x).expect("state nodes are truth nodes");
        let tr = truth.column(kt);
        let [m, l68, h68, l95, h95] = [0, 1, 2, 3, 4].map(|c| state_bands[c].column(k));
        probe_metrics.push(ProbeMetrics {
            x,
            observed: observed.contains(&((x / X_TOLERANCE).round() as u64)),
            rmse: rmse(&m, &tr)?,
            coverage68: coverage(&tr, &l68, &h68)?,
            coverage95: coverage(&tr, &l95, &h95)?,
            coverage95_post_burn_in: coverage(&tr[burn..], &l95[burn..], &h95[burn..])?,
        });
        if plots {
            let bands = plot::Bands { mean: &m, lo68: &l68, hi68: &h68, lo95: &l95, hi95: &h95 };
            let svg = plot::band_plot(&format!("u(x = {x}, t)"), &times, Some(&tr), &bands);
            std::fs::write(out.join(format!("probe_x{x}.svg")), svg)?;
        }
    }

    let values = posterior.column("value")?;
    let weights = posterior.column("weight")?;
    let ws = WeightedSample::new(&values, &weights)?;
    let band = Band::of(&ws);
    let hist = weighted_histogram(&ws, HISTOGRAM_BINS)?;
    let mut hist_table = Table::new(&["lo", "hi", "mass"]);
    for (e, m) in hist.edges.windows(2).zip(&hist.mass) {
        hist_table.push(vec![e[0], e[1], *m]);
    }
    hist_table.write(&out.join("sigmaE_histogram.csv"))?;
    let sigma_e = PosteriorMetrics {
        mean: band.mean,
        lo68: band.lo68,
        hi68: band.hi68,
        lo95: band.lo95,
        hi95: band.hi95,
        width95: band.width95(),
        histogram_edges: hist.edges.clone(),
        histogram_mass: hist.mass.clone(),
    };

    if plots {
        std::fs::write(
            out.join("theta.svg"),
            plot::band_plot(
                "theta(t)",
                &times,
                Some(&th),
                &plot::Bands { mean: &mean, lo68: &lo68, hi68: &hi68, lo95: &lo95, hi95: &hi95 },
            ),
        )?;
        std::fs::write(out.join("sigmaE_histogram.svg"), plot::histogram(&hist.edges, &hist.mass))?;
        std::fs::write(out.join("error_field.svg"), plot::heatmap(&truth.times, &truth.xs, &errors))?;
    }

    let metrics = Metrics {
        kind: meta.kind,
        seed: meta.seed,
        sigma_noise: meta.sigma_noise,
        burn_in_time,
        theta,
        probes: probe_metrics,
        field,
        sigma_e,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}
