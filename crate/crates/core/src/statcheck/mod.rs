//! Chernoff-bound sample sizes and the Bernoulli estimators built on them.
//!
//! With `n > ln(2/γ) / (2θ²)` independent Bernoulli trials the empirical mean lies
//! within `θ` of the true probability with probability at least `1 - γ`.

use rand::{Rng as _, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::Posterior;
use crate::rng;
use crate::sim::{episode_seed, run_episode, Controller, EpisodePath, MonitorPolicy, Outcome, ScenarioConfig, SimError};
use crate::uncertainty::{decision_confidence, predictive, Binning, Decision, UncertaintyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("invalid precision: {0}")]
    InvalidSpec(String),
    #[error("no episodes to aggregate")]
    Empty,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

pub type Result<T> = std::result::Result<T, StatError>;

/// Absolute error bound `θ` held with probability at least `1 - γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct PrecisionSpec {
    theta: f64,
    gamma: f64,
}

#[derive(Deserialize)]
struct RawSpec {
    theta: f64,
    gamma: f64,
}

impl TryFrom<RawSpec> for PrecisionSpec {
    type Error = StatError;

    fn try_from(r: RawSpec) -> Result<Self> {
        Self::new(r.theta, r.gamma)
    }
}

impl PrecisionSpec {
    pub fn new(theta: f64, gamma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(StatError::InvalidSpec(format!("theta must lie in (0, 1), got {theta}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(StatError::InvalidSpec(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { theta, gamma })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sample_size(&self) -> usize {
        chernoff_sample_size(self)
    }
}

/// Smallest `n` with `n > ln(2/γ) / (2θ²)`.
pub fn chernoff_sample_size(spec: &PrecisionSpec) -> usize {
    let bound = (2.0 / spec.gamma).ln() / (2.0 * spec.theta * spec.theta);
    bound.floor() as usize + 1
}

/// Estimated probability of staying in the safe set, with the outcome breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEstimate {
    pub eta_hat: f64,
    pub n: usize,
    pub spec: PrecisionSpec,
    /// Completed plus handed-over episodes.
    pub safe_count: usize,
    pub completed_count: usize,
    pub handover_count: usize,
    pub collision_count: usize,
    pub out_of_bounds_count: usize,
    /// Controller errors, counted as unsafe.
    pub failure_count: usize,
    pub autonomy_rate: f64,
}

impl SafetyEstimate {
    pub fn from_outcomes(outcomes: &[Outcome], spec: PrecisionSpec) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(StatError::Empty);
        }
        let count = |o: Outcome| outcomes.iter().filter(|&&x| x == o).count();
        let n = outcomes.len();
        let (completed, handover) = (count(Outcome::Completed), count(Outcome::Handover));
        Ok(Self {
            eta_hat: (completed + handover) as f64 / n as f64,
            n,
            spec,
            safe_count: completed + handover,
            completed_count: completed,
            handover_count: handover,
            collision_count: count(Outcome::Collided),
            out_of_bounds_count: count(Outcome::OutOfBounds),
            failure_count: count(Outcome::ControllerFailure),
            autonomy_rate: 1.0 - handover as f64 / n as f64,
        })
    }
}

/// Fraction of episodes that did not end in a handover.
pub fn autonomy_rate(paths: &[EpisodePath]) -> Result<f64> {
    if paths.is_empty() {
        return Err(StatError::Empty);
    }
    let handovers = paths.iter().filter(|p| p.outcome == Outcome::Handover).count();
    Ok(1.0 - handovers as f64 / paths.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyRun {
    pub estimate: SafetyEstimate,
    /// Episodes in index order.
    pub paths: Vec<EpisodePath>,
}

/// Runs `chernoff_sample_size(spec)` episodes, episode `i` seeded from
/// `(master_seed, i)`. Episodes run on the current rayon pool and are merged by
/// index, so the result does not depend on scheduling.
pub fn estimate_probabilistic_safety(
    scenario: &ScenarioConfig,
    controller: &dyn Controller,
    monitor: Option<&MonitorPolicy>,
    spec: PrecisionSpec,
    master_seed: u64,
) -> Result<SafetyRun> {
    let n = chernoff_sample_size(&spec);
    let paths = (0..n as u64)
        .into_par_iter()
        .map(|i| run_episode(scenario, controller, monitor, episode_seed(master_seed, i)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let outcomes: Vec<Outcome> = paths.iter().map(|p| p.outcome).collect();
    Ok(SafetyRun {
        estimate: SafetyEstimate::from_outcomes(&outcomes, spec)?,
        paths,
    })
}

/// Share of `n` successes in `chernoff_sample_size(spec)` Bernoulli(`p`) draws —
/// the estimator with the simulator replaced by a coin.
pub fn bernoulli_estimate<R: RngCore + ?Sized>(p: f64, spec: &PrecisionSpec, rng: &mut R) -> f64 {
    let n = chernoff_sample_size(spec);
    let hits = (0..n).filter(|_| rng.random::<f64>() < p).count();
    hits as f64 / n as f64
}

/// High-precision audit of the real-time confidence: `η₂` for `decision` over
/// `chernoff_sample_size(spec)` posterior draws on one frame's features.
pub fn estimate_decision_confidence_offline(
    posterior: &Posterior,
    features: &[f64],
    decision: &Decision,
    epsilon: f64,
    bins: &Binning,
    spec: &PrecisionSpec,
    seed: u64,
) -> Result<(f64, usize)> {
    let n = chernoff_sample_size(spec);
    let pred = predictive(posterior, features, n, &mut rng::seeded(seed))?;
    Ok((decision_confidence(&pred, decision, epsilon, bins), n))
}
