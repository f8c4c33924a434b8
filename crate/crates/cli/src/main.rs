use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tvpf_cli::{run, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "tvpf", version, about = "Particle filtering of time-varying PDE source parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file, or `advection_logistic` / `heat_sine` for the built-in experiments.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the truth and noisy observations.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the particle filter on simulated observations.
    Estimate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Accept data generated from a different configuration.
        #[arg(long)]
        allow_mismatch: bool,
    },
    /// Score an estimate against the truth.
    Report {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write SVG plots.
        #[arg(long)]
        plots: bool,
        /// Probe locations (repeatable); defaults depend on the problem.
        #[arg(long = "probe")]
        probes: Vec<f64>,
    },
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(&config)?;
            let out = out
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .ok_or_else(|| CliError::Validation("no --out given and the config has no output_dir".into()))?;
            let meta = run::simulate(&cfg, &out)?;
            println!("wrote {} (sigma_noise = {})", out.display(), meta.sigma_noise);
        }
        Command::Estimate { config, data, out, allow_mismatch } => {
            let cfg = load(&config)?;
            let meta = run::estimate(&cfg, &data, &out, allow_mismatch)?;
            println!(
                "wrote {} ({} steps, final ESS {:.1})",
                out.display(),
                meta.steps,
                meta.final_effective_sample_size
            );
        }
        Command::Report { data, est, out, plots, probes } => {
            let probes = (!probes.is_empty()).then_some(probes.as_slice());
            let m = run::report(&data, &est, &out, probes, plots)?;
            println!(
                "theta rmse {:.4} (post burn-in {:.4}), 95% coverage {:.3}; sigma_E {:.4} [{:.4}, {:.4}]",
                m.theta.rmse,
                m.theta.rmse_post_burn_in,
                m.theta.coverage95_post_burn_in,
                m.sigma_e.mean,
                m.sigma_e.lo95,
                m.sigma_e.hi95
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
