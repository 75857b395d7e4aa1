use crate::nn::{loss_and_gradient, NetworkSpec};

use super::{check_len, BayesError, Result};

/// A data term over a flat parameter vector.
pub trait Likelihood: Sync {
    fn dim(&self) -> usize;

    /// Negative log-likelihood at `w`; its gradient is added into `grad`.
    fn neg_log_likelihood(&self, w: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Extracted features with their class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl FeatureDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        check_len(features.len(), labels.len())?;
        for f in &features {
            check_len(dim, f.len())?;
            if f.iter().any(|v| !v.is_finite()) {
                return Err(BayesError::NonFinite("features"));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(BayesError::InvalidConfig(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.features.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }
}

/// Softmax classification likelihood of a head network: the summed cross-entropy.
pub struct HeadLikelihood<'a> {
    pub spec: &'a NetworkSpec,
    pub data: &'a FeatureDataset,
}

impl Likelihood for HeadLikelihood<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn neg_log_likelihood(&self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len(self.dim(), w.len())?;
        let mut total = 0.0;
        for (x, y) in self.data.iter() {
            let (loss, _) = loss_and_gradient(self.spec, w, x, y, None, grad)?;
            total += loss;
        }
        if !total.is_finite() {
            return Err(BayesError::NonFinite("negative log-likelihood"));
        }
        Ok(total)
    }
}

/// Observations `x_i ~ N(w, noise_sd²)` of a single unknown mean `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMean {
    pub observations: Vec<f64>,
    pub noise_sd: f64,
}

impl GaussianMean {
    /// Exact posterior `(mean, sd)` under a `N(0, prior_sd²)` prior.
    pub fn posterior(&self, prior_sd: f64) -> (f64, f64) {
        let precision = 1.0 / prior_sd.powi(2) + self.observations.len() as f64 / self.noise_sd.powi(2);
        let mean = self.observations.iter().sum::<f64>() / self.noise_sd.powi(2) / precision;
        (mean, precision.sqrt().recip())
    }
}

impl Likelihood for GaussianMean {
    fn dim(&self) -> usize {
        1
    }

    fn neg_log_likelihood(&self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len(1, w.len())?;
        let var = self.noise_sd.powi(2);
        let norm = 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        let mut total = 0.0;
        for &x in &self.observations {
            total += 0.5 * (w[0] - x).powi(2) / var + norm;
            grad[0] += (w[0] - x) / var;
        }
        Ok(total)
    }
}
