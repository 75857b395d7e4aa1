//! The work behind each subcommand, independent of argument parsing.

use std::path::Path;

use bnn_verify::bayes::{feature_dataset, train_hmc, train_mcd, train_vi, McdPosterior, Posterior, Prior, MCD_RATES};
use bnn_verify::nn::{LayerSpec, NetworkSpec};
use bnn_verify::rng;
use bnn_verify::sim::{collect_dataset, episode_seed, run_episode, EpisodePath, Weather};
use bnn_verify::statcheck::{chernoff_sample_size, estimate_probabilistic_safety, PrecisionSpec};

use crate::config::{Method, RunConfig};
use crate::dataset;
use crate::error::{CliError, Result};
use crate::json;
use crate::model_file::{ModelFile, TrainingMetadata};
use crate::report::{Cell, PrecisionUsed, SummaryReport, WarningCounts};
use crate::trajectory;

/// Drives the autopilot and writes the labelled frames to `out`. Returns the frame count.
pub fn collect(cfg: &RunConfig, out: &Path) -> Result<usize> {
    cfg.validate()?;
    let scenario = cfg.scenario.build(cfg.collect.weather)?.with_disturbance(cfg.collect.disturbance);
    let frames = collect_dataset(&scenario, cfg.collect.episodes, cfg.collect.seed, &cfg.binning()?)?;
    dataset::write(out, &frames, scenario.map)?;
    Ok(frames.len())
}

/// Trains `method` on the dataset in `dataset_dir`. VI and HMC fit the head on
/// features of the dropout network in `mcd_model`, starting from its head weights.
pub fn train(cfg: &RunConfig, method: Method, dataset_dir: &Path, mcd_model: Option<&Path>) -> Result<ModelFile> {
    cfg.validate()?;
    let network = match method {
        Method::Mcd => None,
        Method::Vi | Method::Hmc => {
            let path = mcd_model.ok_or_else(|| {
                CliError::Usage(format!("{} training needs a dropout network (--mcd-model)", method.name()))
            })?;
            let file = ModelFile::load(path)?;
            if file.method != Method::Mcd {
                return Err(CliError::Usage(format!("{} is a {} model, not mcd", path.display(), file.method.name())));
            }
            Some(file.network.to_posterior()?)
        }
    };
    let data = dataset::read(dataset_dir, cfg.classes)?;
    let images = data.to_image_dataset();
    match (method, network) {
        (Method::Mcd, _) => {
            let spec = NetworkSpec::steering(cfg.classes, MCD_RATES)?;
            let (post, report) =
                train_mcd(&images, &spec, NetworkSpec::STEERING_EXTRACTOR_LAYERS, &cfg.mcd.to_config())?;
            let metadata = TrainingMetadata {
                seed: cfg.mcd.seed,
                epochs: cfg.mcd.epochs,
                dataset_hash: data.hash,
                train_accuracy: Some(report.train_accuracy),
                final_loss: report.epoch_losses.last().copied(),
                final_elbo: None,
                acceptance_rate: None,
            };
            Ok(ModelFile::new(&post, &Posterior::Mcd(post.clone()), metadata))
        }
        (_, Some(net)) => {
            check_classes(&net, cfg.classes)?;
            let features = feature_dataset(&net, &images)?;
            let head = deterministic_head(net.head_spec())?;
            let prior = Prior::uniform(&head, cfg.prior_scale)?;
            let mut metadata = TrainingMetadata {
                seed: 0,
                epochs: 0,
                dataset_hash: data.hash,
                train_accuracy: None,
                final_loss: None,
                final_elbo: None,
                acceptance_rate: None,
            };
            let post = if method == Method::Vi {
                let (post, run) = train_vi(&features, &head, &prior, net.head_weights(), &cfg.vi.to_config())?;
                metadata.seed = cfg.vi.seed;
                metadata.epochs = cfg.vi.iterations;
                metadata.final_elbo = run.elbo_trace.last().copied();
                post
            } else {
                let mut r = rng::seeded(cfg.hmc.seed);
                let (post, run) = train_hmc(&features, &head, &prior, net.head_weights(), &cfg.hmc.to_config(), &mut r)?;
                metadata.seed = cfg.hmc.seed;
                metadata.epochs = cfg.hmc.iterations();
                metadata.acceptance_rate = Some(run.acceptance_rate);
                post
            };
            Ok(ModelFile::new(&net, &post, metadata))
        }
        (_, None) => unreachable!("checked above"),
    }
}

fn check_classes(net: &McdPosterior, classes: usize) -> Result<()> {
    if net.spec().num_classes() != classes {
        return Err(CliError::Usage(format!(
            "the dropout network has {} classes, the configuration {classes}",
            net.spec().num_classes()
        )));
    }
    Ok(())
}

/// The dropout head's layers without dropout.
fn deterministic_head(head: &NetworkSpec) -> Result<NetworkSpec> {
    let layers = head.layers().iter().map(|l| LayerSpec { dropout_rate: 0.0, ..*l }).collect();
    Ok(NetworkSpec::new(head.input_shape().to_vec(), layers, head.num_classes())?)
}

/// Estimates probabilistic safety for every weather in the grid, unmonitored and,
/// with `with_monitor`, monitored. Writes `report.json` and one trajectory log per
/// cell under `out`.
pub fn eval_safety(cfg: &RunConfig, model: &ModelFile, with_monitor: bool, out: &Path) -> Result<SummaryReport> {
    cfg.validate()?;
    let controller = model.controller(cfg.decision_settings()?)?;
    let spec = cfg.precision_spec()?;
    let monitor = cfg.monitor()?;
    let modes: &[bool] = if with_monitor { &[false, true] } else { &[false] };
    let mut cells = Vec::new();
    for &weather in &cfg.weathers {
        let scenario = cfg.scenario.build(weather)?;
        for &monitored in modes {
            let run = estimate_probabilistic_safety(&scenario, &controller, monitored.then_some(&monitor), spec, cfg.seed)?;
            let name = format!(
                "trajectories/{}_{}.csv",
                weather,
                if monitored { "monitored" } else { "unmonitored" }
            );
            json::write_file(&out.join(&name), &trajectory::to_bytes(run.paths.iter().enumerate(), scenario.dt)?)?;
            cells.push(Cell {
                method: model.method,
                scenario: scenario.map,
                weather,
                monitor: monitored,
                estimate: run.estimate,
                autonomy_rate: run.estimate.autonomy_rate,
                warnings: WarningCounts::from_paths(&run.paths),
                trajectories: name,
            });
        }
    }
    let report = SummaryReport {
        format_version: crate::report::FORMAT_VERSION,
        precision: PrecisionUsed {
            theta: spec.theta(),
            gamma: spec.gamma(),
            n: chernoff_sample_size(&spec),
        },
        cells,
        config: cfg.clone(),
    };
    json::write_file(&out.join("report.json"), &json::to_pretty(&report)?)?;
    Ok(report)
}

/// One episode (index 0 under master `seed`) and its trajectory log.
pub fn drive(
    cfg: &RunConfig,
    model: &ModelFile,
    weather: Weather,
    seed: u64,
    monitored: bool,
) -> Result<(EpisodePath, Vec<u8>)> {
    cfg.validate()?;
    let controller = model.controller(cfg.decision_settings()?)?;
    let scenario = cfg.scenario.build(weather)?;
    let monitor = cfg.monitor()?;
    let path = run_episode(&scenario, &controller, monitored.then_some(&monitor), episode_seed(seed, 0))?;
    let log = trajectory::to_bytes([(0, &path)], scenario.dt)?;
    Ok((path, log))
}

pub fn plan_samples(theta: f64, gamma: f64) -> Result<usize> {
    let spec = PrecisionSpec::new(theta, gamma).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(chernoff_sample_size(&spec))
}
