//! Posterior approximations over the fully-connected head.
//!
//! MC dropout trains the whole network with dropout active and samples masks at test
//! time. VI and HMC operate on the head only, on features produced by the frozen
//! extractor of a trained MC dropout network.

mod hmc;
mod likelihood;
mod mcd;
mod posterior;
mod vi;

pub use hmc::{leapfrog, potential_energy, run_hmc, train_hmc, HmcConfig, HmcRun};
pub use likelihood::{FeatureDataset, GaussianMean, HeadLikelihood, Likelihood};
pub use mcd::{extract_features, feature_dataset, train_mcd, ImageDataset, McdConfig, McdReport};
pub use posterior::{sample_weights, HeadSample, McdPosterior, Posterior, Prior};
pub use vi::{elbo_gradient, fit_vi, kl_to_prior, train_vi, ElboGradient, ViConfig, ViRun};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, BayesError>;

/// Dropout rates for the first three head layers.
pub const MCD_RATES: [f64; 3] = [0.1, 0.08, 0.08];

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(BayesError::Dimension { expected, actual })
    }
}
