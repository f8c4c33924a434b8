//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;

use tvpf_cli::config::{ExperimentConfig, ADVECTION_LOGISTIC, HEAT_SINE};
use tvpf_cli::io::Table;
use tvpf_cli::run::{self, Metrics};
use tvpf_core::filter::{
    init_ensemble, jitter_drift_unclamped, multiplicative_prior, normalize_log_weights, resample_indices, run_filter,
    shrink_drift, shrink_factor, update_drift_moments, FilterConfig, Resampler, UniformRange,
};
use tvpf_core::integrate::{step_constant_theta, IntegratorConfig};
use tvpf_core::models::{ProblemSpec, ThetaTruth};
use tvpf_core::rng::{substream, Purpose};
use tvpf_core::stats::{weighted_quantiles, WeightedSample};
use tvpf_core::synth::{generate_observations, simulate_truth};

const SEEDS: [u64; 4] = [1, 2, 3, 4];
const REQUIRED_SEEDS: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(text: &str, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(text).expect("canned config");
    cfg.seed = seed;
    cfg
}

/// simulate, estimate and report into `root`.
fn pipeline(cfg: &ExperimentConfig, root: &Path) -> Metrics {
    let (data, est, rep) = (root.join("data"), root.join("est"), root.join("rep"));
    run::simulate(cfg, &data).expect("simulate");
    run::estimate(cfg, &data, &est, false).expect("estimate");
    run::report(&data, &est, &rep, None, false).expect("report")
}

fn count_line(hits: usize) -> String {
    format!("{hits}/{} seeds (need {REQUIRED_SEEDS})", SEEDS.len())
}

fn criterion_1(adv: &[Metrics]) -> Outcome {
    let mut hits = 0;
    let mut parts = Vec::new();
    for m in adv {
        let ok = m.theta.rmse_post_burn_in <= 0.20 && m.theta.coverage95_post_burn_in >= 0.85;
        hits += ok as usize;
        parts.push(format!(
            "seed {}: rmse {:.3} cov95 {:.3}",
            m.seed, m.theta.rmse_post_burn_in, m.theta.coverage95_post_burn_in
        ));
    }
    outcome(hits >= REQUIRED_SEEDS, format!("{}; {}", count_line(hits), parts.join(", ")))
}

fn criterion_2(adv: &[Metrics]) -> Outcome {
    let mut hits = 0;
    let mut parts = Vec::new();
    for m in adv {
        let e = &m.sigma_e;
        let ok = (0.1..=0.6).contains(&e.mean) && e.width95 < 0.5;
        hits += ok as usize;
        parts.push(format!("seed {}: mean {:.3} width95 {:.3}", m.seed, e.mean, e.width95));
    }
    outcome(hits >= REQUIRED_SEEDS, format!("{}; {}", count_line(hits), parts.join(", ")))
}

fn criterion_3(heat: &[Metrics]) -> Outcome {
    let mut hits = 0;
    let mut parts = Vec::new();
    for m in heat {
        let probes_ok = m.probes.len() == 2 && m.probes.iter().all(|p| p.coverage95 >= 0.85);
        let ok = m.theta.rmse_post_burn_in <= 0.15 && probes_ok;
        hits += ok as usize;
        let probes: Vec<String> = m.probes.iter().map(|p| format!("x={} {:.3}", p.x, p.coverage95)).collect();
        parts.push(format!("seed {}: rmse {:.3} probe cov95 {}", m.seed, m.theta.rmse_post_burn_in, probes.join(" ")));
    }
    outcome(hits >= REQUIRED_SEEDS, format!("{}; {}", count_line(hits), parts.join(", ")))
}

fn criterion_4(adv: &[Metrics], heat: &[Metrics]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, h) in adv.iter().zip(heat) {
        pass &= h.field.normalized_error < a.field.normalized_error;
        parts.push(format!(
            "seed {}: heat {:.4} < adv {:.4}",
            a.seed, h.field.normalized_error, a.field.normalized_error
        ));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, text) in [("advection", ADVECTION_LOGISTIC), ("heat", HEAT_SINE)] {
        let cfg = config(text, 1);
        let problem = cfg.problem_spec().unwrap();
        let system = cfg.system().unwrap();
        let schedule = cfg.schedule(&system).unwrap();
        let finals: Vec<Vec<f64>> = [4, 8, 16]
            .iter()
            .map(|&k| {
                let truth = simulate_truth(&problem, &system, &IntegratorConfig::with_substeps(k), &schedule).unwrap();
                truth.states.last().unwrap().clone()
            })
            .collect();
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let ratio = diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2]);
        pass &= (3.4..=4.6).contains(&ratio);
        parts.push(format!("{name} ratio {ratio:.3}"));
    }
    outcome(pass, format!("{} (K = 4, 8, 16)", parts.join(", ")))
}

fn same_tree(a: &Path, b: &Path) -> bool {
    ["data", "est", "rep"].iter().all(|sub| {
        let mut names: Vec<_> = fs::read_dir(a.join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        !names.is_empty()
            && names.iter().all(|n| fs::read(a.join(sub).join(n)).ok() == fs::read(b.join(sub).join(n)).ok())
    })
}

fn criterion_6(tmp: &Path, adv: &[Metrics], heat: &[Metrics]) -> Outcome {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    // weight normalization, on extreme log weights and on a full filter run
    let w = normalize_log_weights(&[-1e4, -1e4 - 3.0, -2e4, -1e4 + 0.5], 1).unwrap();
    check("weights", (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    let post = Table::read(&tmp.join("heat-1/est/sigmaE_posterior.csv"), &["value", "weight"]).unwrap();
    check("run weights", (post.column("weight").unwrap().iter().sum::<f64>() - 1.0).abs() <= 1e-12);

    // shrinkage keeps the weighted mean
    let drift = [0.2, 1.0, 3.5, 0.05, 7.25];
    let weights = [0.1, 0.2, 0.3, 0.25, 0.15];
    let (mean, _) = update_drift_moments(&drift, 1, &weights);
    let a = shrink_factor(0.96);
    let (after, _) = update_drift_moments(&shrink_drift(&drift, &mean, a), 1, &weights);
    check("shrink mean", (after[0] - mean[0]).abs() <= 4.0 * f64::EPSILON * mean[0]);

    // shrink plus jitter keeps the variance
    let n = 10_000;
    let fcfg = FilterConfig {
        particles: n,
        delta: 0.96,
        sigma_c: 0.1,
        sigma_d: 1.0,
        state_prior: vec![UniformRange::new(0.0, 1.0)],
        theta_prior: vec![UniformRange::new(0.0, 1.0)],
        drift_prior: UniformRange::new(0.05, 10.0),
        seed: 5,
        resampler: Resampler::Multinomial,
    };
    let e = init_ensemble(&fcfg, 1).unwrap();
    let shrunk = shrink_drift(&e.drift, &e.drift_mean, a);
    let (_, cov) = update_drift_moments(&jitter_drift_unclamped(&shrunk, &e.drift_cov, a, 5, 1), 1, &e.weights);
    check("liu-west variance", (cov[0] / e.drift_cov[0] - 1.0).abs() < 0.05);

    // resampling counts
    let g: Vec<f64> = (0..1000).map(|k| if k % 3 == 0 { 0.0018 } else { 0.0006 }).collect();
    let mut counts = vec![0usize; g.len()];
    for k in resample_indices(&g, 3, 2, Resampler::Systematic) {
        counts[k] += 1;
    }
    check(
        "systematic counts",
        counts.iter().zip(&g).all(|(&c, gk)| {
            let e = 1000.0 * gk;
            c as f64 >= e.floor() - 1e-9 && c as f64 <= e.ceil() + 1e-9
        }),
    );
    let n = 20_000;
    let g = vec![1.0 / n as f64; n];
    let mut blocks = vec![0usize; n / 100];
    for k in resample_indices(&g, 3, 2, Resampler::Multinomial) {
        blocks[k / 100] += 1;
    }
    let (mean, sd) = (100.0, (100.0f64 * (1.0 - 0.005)).sqrt());
    check("multinomial counts", blocks.iter().all(|&c| (c as f64 - mean).abs() <= 4.0 * sd));

    // advection conserves the node sum without a source
    let cfg = config(ADVECTION_LOGISTIC, 1);
    let system = cfg.system().unwrap();
    let u0 = cfg.problem_spec().unwrap().initial_state(&system);
    let s0: f64 = u0.iter().sum();
    let mut u = u0.clone();
    let mut conserved = true;
    for j in 0..300 {
        let (t0, t1) = (j as f64 * 0.05, (j + 1) as f64 * 0.05);
        u = step_constant_theta(&system, &u, 0.0, t0, t1, &IntegratorConfig::default()).unwrap();
        conserved &= (u.iter().sum::<f64>() - s0).abs() <= 1e-10 * s0.abs();
    }
    check("advection conservation", conserved);

    // heat matrix symmetric and negative definite (LDL pivots of -A positive)
    let heat_system = config(HEAT_SINE, 1).system().unwrap();
    let a = heat_system.matrix();
    check("heat symmetry", a.is_symmetric());
    let mut pivot = -a.diag()[0];
    let mut definite = pivot > 0.0;
    for i in 1..a.dim() {
        pivot = -a.diag()[i] - a.lower()[i] * a.upper()[i - 1] / pivot;
        definite &= pivot > 0.0;
    }
    check("heat negativity", definite);

    // quantiles are monotone in the level
    let mut rng = substream(9, 0, 0, Purpose::Prior);
    let mut monotone = true;
    for _ in 0..200 {
        let len = rng.random_range(1..40);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let Ok(ws) = WeightedSample::new(&values, &w) else { continue };
        let qs: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let q = weighted_quantiles(&ws, &qs).unwrap();
        monotone &= q.windows(2).all(|p| p[0] <= p[1]);
    }
    check("quantile monotonicity", monotone);

    // full pipeline determinism
    let again_adv = pipeline(&config(ADVECTION_LOGISTIC, 1), &tmp.join("adv-1-again"));
    let again_heat = pipeline(&config(HEAT_SINE, 1), &tmp.join("heat-1-again"));
    check("metrics determinism", again_adv == adv[0] && again_heat == heat[0]);
    check(
        "byte-identical re-runs",
        same_tree(&tmp.join("adv-1"), &tmp.join("adv-1-again"))
            && same_tree(&tmp.join("heat-1"), &tmp.join("heat-1-again")),
    );

    if failed.is_empty() {
        outcome(true, "12 invariants hold")
    } else {
        outcome(false, format!("failed: {}", failed.join(", ")))
    }
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    for (problem, m, xs, dt) in [
        (ProblemSpec::advection_logistic(), 50, (0..25).map(|k| 0.1 + 0.2 * k as f64).collect::<Vec<_>>(), 0.05),
        (ProblemSpec::heat_sine(), 30, (0..8).map(|k| 0.1 + 0.4 * k as f64).collect(), 0.1),
    ] {
        let problem = ProblemSpec { theta: ThetaTruth::Constant { value: 0.8 }, ..problem };
        let system = problem.discretize(m).unwrap();
        let schedule = tvpf_core::synth::ObservationSchedule::uniform(&system, &xs, dt, problem.t_final).unwrap();
        let icfg = IntegratorConfig::default();
        let truth = simulate_truth(&problem, &system, &icfg, &schedule).unwrap();
        let ds = generate_observations(truth, schedule, 0.0, 1).unwrap();
        let fcfg = FilterConfig {
            particles: 1,
            delta: 0.96,
            sigma_c: 0.0,
            sigma_d: 1.0,
            state_prior: multiplicative_prior(&ds.truth.states[0], 1.0, 1.0, 0.0),
            theta_prior: vec![UniformRange::point(0.8)],
            drift_prior: UniformRange::point(0.0),
            seed: 1,
            resampler: Resampler::Multinomial,
        };
        let s = run_filter(&system, &ds.schedule, &ds.measurements, &fcfg, &icfg).unwrap();
        for (est, tr) in s.state_means().iter().zip(&ds.truth.states) {
            let norm = tr.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = est.iter().zip(tr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            worst = worst.max(err / norm);
        }
    }
    outcome(worst <= 1e-10, format!("max relative per-step error {worst:.3e} (limit 1e-10)"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let adv: Vec<Metrics> =
        SEEDS.iter().map(|&s| pipeline(&config(ADVECTION_LOGISTIC, s), &tmp.path().join(format!("adv-{s}")))).collect();
    let adv_time = start.elapsed();
    let start = Instant::now();
    let heat: Vec<Metrics> =
        SEEDS.iter().map(|&s| pipeline(&config(HEAT_SINE, s), &tmp.path().join(format!("heat-{s}")))).collect();
    let heat_time = start.elapsed();
    println!("canned runs: advection {adv_time:.1?}, heat {heat_time:.1?} for {} seeds", SEEDS.len());
    for (a, h) in adv.iter().zip(&heat) {
        println!("seed {}: sigma_noise advection {:.4}, heat {:.4}", a.seed, a.sigma_noise, h.sigma_noise);
    }

    let results = [
        criterion_1(&adv),
        criterion_2(&adv),
        criterion_3(&heat),
        criterion_4(&adv, &heat),
        criterion_5(),
        criterion_6(tmp.path(), &adv, &heat),
        criterion_7(),
    ];
    let mut failures = 0;
    for (k, r) in results.iter().enumerate() {
        println!("criterion {}: {} {}", k + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failures += (!r.pass) as usize;
    }
    if failures > 0 {
        println!("{failures} of {} criteria failed", results.len());
        std::process::exit(1);
    }
}
