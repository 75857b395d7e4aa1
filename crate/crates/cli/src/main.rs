use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bnn_verify::sim::{MapKind, Weather};
use bnn_verify_cli::{commands, CliError, Method, ModelFile, Result, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bnnv", version, about = "Train, evaluate and certify Bayesian steering controllers")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for episode simulation (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record autopilot frames and steering labels.
    Collect {
        #[arg(long)]
        scenario: Option<MapKind>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a posterior: MC dropout on images, or VI/HMC on dropout-network features.
    Train {
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Dropout network supplying features (required for vi and hmc).
        #[arg(long)]
        mcd_model: Option<PathBuf>,
        /// Model file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// MC dropout epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// VI iterations.
        #[arg(long)]
        iterations: Option<usize>,
        /// Retained HMC samples.
        #[arg(long)]
        chain_samples: Option<usize>,
        /// Seed of the selected method.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate probabilistic safety over a weather grid.
    EvalSafety {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<MapKind>,
        /// Comma-separated weather presets.
        #[arg(long, value_delimiter = ',')]
        weathers: Option<Vec<Weather>>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also evaluate with the warning monitor active.
        #[arg(long)]
        with_monitor: bool,
        /// Output directory for report.json and trajectories/.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single episode and log every step.
    Drive {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<MapKind>,
        #[arg(long, default_value = "clear")]
        weather: Weather,
        #[arg(long)]
        seed: Option<u64>,
        /// Drive without the warning monitor.
        #[arg(long)]
        unmonitored: bool,
        /// Trajectory CSV to write (stdout when absent).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the Chernoff sample size for (θ, γ).
    PlanSamples {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| execute(cli.command, &mut cfg))
}

fn required(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| CliError::Usage(format!("no {what} given (flag or config paths)")))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn execute(command: Command, cfg: &mut RunConfig) -> Result<()> {
    match command {
        Command::Collect {
            scenario,
            episodes,
            seed,
            out,
        } => {
            set(&mut cfg.scenario.map, scenario);
            set(&mut cfg.collect.episodes, episodes);
            set(&mut cfg.collect.seed, seed);
            let out = out.or_else(|| cfg.paths.dataset.clone()).unwrap_or_else(|| PathBuf::from("dataset"));
            let n = commands::collect(cfg, &out)?;
            println!("{n} labelled frames written to {}", out.display());
        }
        Command::Train {
            method,
            dataset,
            mcd_model,
            out,
            epochs,
            iterations,
            chain_samples,
            seed,
        } => {
            set(&mut cfg.method, method);
            set(&mut cfg.mcd.epochs, epochs);
            set(&mut cfg.vi.iterations, iterations);
            set(&mut cfg.hmc.samples, chain_samples);
            if let Some(s) = seed {
                match cfg.method {
                    Method::Mcd => cfg.mcd.seed = s,
                    Method::Vi => cfg.vi.seed = s,
                    Method::Hmc => cfg.hmc.seed = s,
                }
            }
            let mcd_model = mcd_model.or_else(|| cfg.paths.mcd_model.clone());
            if cfg.method != Method::Mcd && mcd_model.is_none() {
                return Err(CliError::Usage(format!(
                    "{} training needs --mcd-model",
                    cfg.method.name()
                )));
            }
            let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
            let out = out.or_else(|| cfg.paths.model.clone()).unwrap_or_else(|| PathBuf::from("model.json"));
            let model = commands::train(cfg, cfg.method, &dataset, mcd_model.as_deref())?;
            model.save(&out)?;
            let m = &model.metadata;
            let detail = match (m.train_accuracy, m.final_elbo, m.acceptance_rate) {
                (Some(a), _, _) => format!("training accuracy {a:.4}"),
                (_, Some(e), _) => format!("final ELBO {e:.4}"),
                (_, _, Some(r)) => format!("acceptance rate {r:.4}"),
                _ => String::new(),
            };
            println!("{} model written to {} ({detail})", model.method.name(), out.display());
        }
        Command::EvalSafety {
            model,
            scenario,
            weathers,
            theta,
            gamma,
            seed,
            with_monitor,
            out,
        } => {
            set(&mut cfg.scenario.map, scenario);
            set(&mut cfg.weathers, weathers);
            set(&mut cfg.precision.theta, theta);
            set(&mut cfg.precision.gamma, gamma);
            set(&mut cfg.seed, seed);
            cfg.validate()?;
            let model = ModelFile::load(&required(model, &cfg.paths.model, "model")?)?;
            let out = out.or_else(|| cfg.paths.out.clone()).unwrap_or_else(|| PathBuf::from("eval"));
            let report = commands::eval_safety(cfg, &model, with_monitor, &out)?;
            println!("n = {} episodes per cell", report.precision.n);
            for c in &report.cells {
                println!(
                    "{:<6} {:<11} safety {:.4}  autonomy {:.4}  collided {}  out-of-bounds {}  handover {}",
                    c.weather.name(),
                    if c.monitor { "monitored" } else { "unmonitored" },
                    c.estimate.eta_hat,
                    c.autonomy_rate,
                    c.estimate.collision_count,
                    c.estimate.out_of_bounds_count,
                    c.estimate.handover_count
                );
            }
            println!("report written to {}", out.join("report.json").display());
        }
        Command::Drive {
            model,
            scenario,
            weather,
            seed,
            unmonitored,
            log,
        } => {
            set(&mut cfg.scenario.map, scenario);
            set(&mut cfg.seed, seed);
            cfg.validate()?;
            let model = ModelFile::load(&required(model, &cfg.paths.model, "model")?)?;
            let (path, bytes) = commands::drive(cfg, &model, weather, cfg.seed, !unmonitored)?;
            match log {
                Some(p) => {
                    bnn_verify_cli::json::write_file(&p, &bytes)?;
                    println!("{} after {} steps; log written to {}", path.outcome.name(), path.records.len() - 1, p.display());
                }
                None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
            }
        }
        Command::PlanSamples { theta, gamma } => {
            let n = commands::plan_samples(theta.unwrap_or(cfg.precision.theta), gamma.unwrap_or(cfg.precision.gamma))?;
            println!("{n}");
        }
    }
    Ok(())
}
