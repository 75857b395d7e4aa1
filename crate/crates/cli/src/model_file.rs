//! Trained models on disk.

use std::path::Path;

use bnn_verify::bayes::{McdPosterior, Posterior};
use bnn_verify::nn::{NetworkSpec, WeightVector};
use bnn_verify::uncertainty::{BayesianController, DecisionSettings};
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::{CliError, Result};
use crate::json;

pub const FORMAT_VERSION: u32 = 1;

/// A dropout-trained network. For VI and HMC models this is the network whose
/// frozen layers produce the head's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McdNetwork {
    pub spec: NetworkSpec,
    /// Index of the first head layer.
    pub head_start: usize,
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
}

impl McdNetwork {
    pub fn from_posterior(p: &McdPosterior) -> Self {
        Self {
            spec: p.spec().clone(),
            head_start: p.head_start(),
            weights: p.weights().0.clone(),
            rates: p.rates(),
        }
    }

    pub fn to_posterior(&self) -> Result<McdPosterior> {
        let post = McdPosterior::new(self.spec.clone(), WeightVector(self.weights.clone()), self.head_start)?;
        if post.rates() != self.rates {
            return Err(CliError::Runtime(format!(
                "dropout rates {:?} disagree with the network's {:?}",
                self.rates,
                post.rates()
            )));
        }
        Ok(post)
    }
}

/// Mean-field Gaussian head; `σ = exp(ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViHead {
    pub spec: NetworkSpec,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmcHead {
    pub spec: NetworkSpec,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// Epochs for MC dropout, ELBO iterations for VI, chain iterations for HMC.
    pub epochs: usize,
    pub dataset_hash: String,
    /// Mask-free training accuracy of the dropout network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_elbo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub method: Method,
    pub network: McdNetwork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vi: Option<ViHead>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc: Option<HmcHead>,
    pub metadata: TrainingMetadata,
}

impl ModelFile {
    pub fn new(network: &McdPosterior, head: &Posterior, metadata: TrainingMetadata) -> Self {
        let (method, vi, hmc) = match head {
            Posterior::Mcd(_) => (Method::Mcd, None, None),
            Posterior::Vi { head, mean, log_std } => (
                Method::Vi,
                Some(ViHead {
                    spec: head.clone(),
                    mu: mean.clone(),
                    rho: log_std.clone(),
                }),
                None,
            ),
            Posterior::Hmc { head, samples } => (
                Method::Hmc,
                None,
                Some(HmcHead {
                    spec: head.clone(),
                    samples: samples.iter().map(|s| s.0.clone()).collect(),
                }),
            ),
        };
        Self {
            format_version: FORMAT_VERSION,
            method,
            network: McdNetwork::from_posterior(network),
            vi,
            hmc,
            metadata,
        }
    }

    /// The feature network and the head posterior.
    pub fn posteriors(&self) -> Result<(McdPosterior, Posterior)> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Runtime(format!("unsupported model format version {}", self.format_version)));
        }
        let network = self.network.to_posterior()?;
        let head = match (self.method, &self.vi, &self.hmc) {
            (Method::Mcd, None, None) => Posterior::Mcd(network.clone()),
            (Method::Vi, Some(v), None) => Posterior::vi(v.spec.clone(), v.mu.clone(), v.rho.clone())?,
            (Method::Hmc, None, Some(h)) => {
                Posterior::hmc(h.spec.clone(), h.samples.iter().cloned().map(WeightVector).collect())?
            }
            _ => {
                return Err(CliError::Runtime(format!(
                    "a {} model must carry exactly its own head parameters",
                    self.method.name()
                )))
            }
        };
        Ok((network, head))
    }

    pub fn controller(&self, settings: DecisionSettings) -> Result<BayesianController> {
        let (network, head) = self.posteriors()?;
        Ok(BayesianController::new(network, head, settings)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        json::to_decimal17(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: ModelFile = json::read(path)?;
        model.posteriors()?;
        Ok(model)
    }
}
