use tvpf_core::filter::{multiplicative_prior, run_filter, FilterConfig, Resampler, UniformRange};
use tvpf_core::integrate::IntegratorConfig;
use tvpf_core::models::{ProblemSpec, ThetaTruth};
use tvpf_core::synth::{generate_observations, simulate_truth, ObservationSchedule, Truth};

fn grid(first: f64, step: f64, last: f64) -> Vec<f64> {
    let n = ((last - first) / step).round() as usize;
    (0..=n).map(|k| first + k as f64 * step).collect()
}

fn canned(heat: bool) -> (ProblemSpec, usize, Vec<f64>, f64) {
    if heat {
        (ProblemSpec::heat_sine(), 30, grid(0.1, 0.4, 2.9), 0.1)
    } else {
        (ProblemSpec::advection_logistic(), 50, grid(0.1, 0.2, 4.9), 0.05)
    }
}

fn simulate(problem: &ProblemSpec, m: usize, xs: &[f64], dt: f64, k: usize) -> (Truth, ObservationSchedule) {
    let system = problem.discretize(m).unwrap();
    let schedule = ObservationSchedule::uniform(&system, xs, dt, problem.t_final).unwrap();
    let truth = simulate_truth(problem, &system, &IntegratorConfig::with_substeps(k), &schedule).unwrap();
    (truth, schedule)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn self_convergence_is_second_order() {
    for heat in [false, true] {
        let (problem, m, xs, dt) = canned(heat);
        let finals: Vec<Vec<f64>> =
            [4, 8, 16].iter().map(|&k| simulate(&problem, m, &xs, dt, k).0.states.last().unwrap().clone()).collect();
        let ratio = max_diff(&finals[0], &finals[1]) / max_diff(&finals[1], &finals[2]);
        assert!((3.4..=4.6).contains(&ratio), "heat={heat}: ratio {ratio}");
    }
}

#[test]
fn advection_truth_conserves_integral_with_source() {
    // with a uniform loading the node sum grows by d times the integral of theta
    let (problem, m, xs, dt) = canned(false);
    let (truth, schedule) = simulate(&problem, m, &xs, dt, 4);
    let d = truth.states[0].len() as f64;
    let times = schedule.all_times();
    let s0: f64 = truth.states[0].iter().sum();
    let k = 4;
    for j in 1..truth.states.len() {
        // midpoint rule over the substeps, as the integrator samples theta
        let (a, b) = (times[j - 1], times[j]);
        let h = (b - a) / k as f64;
        let mut integral = 0.0;
        for i in 0..k {
            integral += problem.theta.eval(a + (i as f64 + 0.5) * h) * h;
        }
        let prev: f64 = truth.states[j - 1].iter().sum();
        let now: f64 = truth.states[j].iter().sum();
        assert!((now - prev - d * integral).abs() <= 1e-10 * now.abs().max(s0), "step {j}");
    }
}

#[test]
fn frozen_filter_reproduces_truth_on_both_problems() {
    for heat in [false, true] {
        let (mut problem, m, xs, dt) = canned(heat);
        problem.theta = ThetaTruth::Constant { value: 0.7 };
        let (truth, schedule) = simulate(&problem, m, &xs, dt, 4);
        let system = problem.discretize(m).unwrap();
        let ds = generate_observations(truth, schedule, 0.0, 3).unwrap();
        let cfg = FilterConfig {
            particles: 1,
            delta: 0.96,
            sigma_c: 0.0,
            sigma_d: 1.0,
            state_prior: multiplicative_prior(&ds.truth.states[0], 1.0, 1.0, 0.0),
            theta_prior: vec![UniformRange::point(0.7)],
            drift_prior: UniformRange::point(0.0),
            seed: 3,
            resampler: Resampler::Multinomial,
        };
        let s = run_filter(&system, &ds.schedule, &ds.measurements, &cfg, &IntegratorConfig::default()).unwrap();
        for (est, tr) in s.state_means().iter().zip(&ds.truth.states) {
            let scale = tr.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = est.iter().zip(tr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(err <= 1e-10 * scale, "heat={heat}: {err} vs {scale}");
        }
    }
}

#[test]
fn filter_runs_are_reproducible() {
    let (problem, m, xs, dt) = canned(true);
    let problem = ProblemSpec { t_final: 5.0, ..problem };
    let (truth, schedule) = simulate(&problem, m, &xs, dt, 4);
    let system = problem.discretize(m).unwrap();
    let ds = generate_observations(truth, schedule, 0.05, 11).unwrap();
    let cfg = FilterConfig {
        particles: 200,
        delta: 0.96,
        sigma_c: 0.1,
        sigma_d: 1.5,
        state_prior: multiplicative_prior(&ds.truth.states[0], 0.5, 1.25, 0.05),
        theta_prior: multiplicative_prior(&[ds.truth.theta[0]], 0.5, 1.25, 0.05),
        drift_prior: UniformRange::new(0.05, 10.0),
        seed: 11,
        resampler: Resampler::Systematic,
    };
    let run = || run_filter(&system, &ds.schedule, &ds.measurements, &cfg, &IntegratorConfig::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    for step in &a.steps {
        assert!(step.theta[0].lo95 <= step.theta[0].lo68 && step.theta[0].hi68 <= step.theta[0].hi95);
        assert!(step.effective_sample_size >= 1.0 - 1e-9 && step.effective_sample_size <= 200.0 + 1e-9);
    }
}
