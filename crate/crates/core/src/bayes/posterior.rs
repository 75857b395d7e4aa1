use std::borrow::Cow;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{logits, sample_dropout_mask, DropoutMask, NetworkSpec, WeightVector};

use super::{check_len, BayesError, Result};

/// Zero-mean Gaussian prior with one scale per layer, expanded to one scale per
/// parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    scales: Vec<f64>,
}

impl Prior {
    /// One scale for every layer of `spec`.
    pub fn per_layer(spec: &NetworkSpec, layer_scales: &[f64]) -> Result<Self> {
        check_len(spec.layers().len(), layer_scales.len())?;
        Self::checked(spec.param_layer_index().into_iter().map(|i| layer_scales[i]).collect())
    }

    /// The same scale for every layer.
    pub fn uniform(spec: &NetworkSpec, scale: f64) -> Result<Self> {
        Self::isotropic(spec.param_count(), scale)
    }

    pub fn isotropic(dim: usize, scale: f64) -> Result<Self> {
        Self::checked(vec![scale; dim])
    }

    fn checked(scales: Vec<f64>) -> Result<Self> {
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(BayesError::InvalidConfig("prior scales must be positive".into()));
        }
        Ok(Self { scales })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    /// `Σ w² / (2σ²)` and its gradient (added into `grad`).
    pub(crate) fn neg_log_density(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for ((&wi, &s), g) in w.iter().zip(&self.scales).zip(grad.iter_mut()) {
            let inv = 1.0 / (s * s);
            total += 0.5 * wi * wi * inv;
            *g += wi * inv;
        }
        total
    }
}

/// A dropout-trained network: the frozen extractor and the head share one weight
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct McdPosterior {
    spec: NetworkSpec,
    weights: WeightVector,
    head_start: usize,
    extractor: NetworkSpec,
    head: NetworkSpec,
    extractor_params: usize,
}

impl McdPosterior {
    /// `head_start` is the index of the first head layer in `spec`.
    pub fn new(spec: NetworkSpec, weights: WeightVector, head_start: usize) -> Result<Self> {
        check_len(spec.param_count(), weights.len())?;
        if !weights.is_finite() {
            return Err(BayesError::NonFinite("weights"));
        }
        let (extractor, head, extractor_params) = spec.split(head_start)?;
        Ok(Self {
            spec,
            weights,
            head_start,
            extractor,
            head,
            extractor_params,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn head_start(&self) -> usize {
        self.head_start
    }

    pub fn extractor_spec(&self) -> &NetworkSpec {
        &self.extractor
    }

    pub fn head_spec(&self) -> &NetworkSpec {
        &self.head
    }

    pub fn extractor_weights(&self) -> &[f64] {
        &self.weights.0[..self.extractor_params]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.weights.0[self.extractor_params..]
    }

    /// Dropout rates of the head layers that use dropout, in layer order.
    pub fn rates(&self) -> Vec<f64> {
        self.head.layers().iter().map(|l| l.dropout_rate).filter(|&r| r > 0.0).collect()
    }

    /// Mask-free pass through the extractor.
    pub fn features(&self, image: &[f64]) -> Result<Vec<f64>> {
        Ok(logits(&self.extractor, self.extractor_weights(), image, None)?)
    }
}

/// One of the three approximations of the head posterior.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Mcd(McdPosterior),
    Vi {
        head: NetworkSpec,
        mean: Vec<f64>,
        log_std: Vec<f64>,
    },
    Hmc {
        head: NetworkSpec,
        samples: Vec<WeightVector>,
    },
}

impl Posterior {
    pub fn vi(head: NetworkSpec, mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        check_len(head.param_count(), mean.len())?;
        check_len(head.param_count(), log_std.len())?;
        // A log-std of -inf is a point mass and is allowed.
        if mean.iter().any(|v| !v.is_finite()) || log_std.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(BayesError::NonFinite("variational parameters"));
        }
        Ok(Self::Vi { head, mean, log_std })
    }

    pub fn hmc(head: NetworkSpec, samples: Vec<WeightVector>) -> Result<Self> {
        if samples.is_empty() {
            return Err(BayesError::InvalidConfig("HMC posterior needs at least one sample".into()));
        }
        for s in &samples {
            check_len(head.param_count(), s.len())?;
        }
        Ok(Self::Hmc { head, samples })
    }

    pub fn head_spec(&self) -> &NetworkSpec {
        match self {
            Self::Mcd(m) => m.head_spec(),
            Self::Vi { head, .. } | Self::Hmc { head, .. } => head,
        }
    }

    pub fn method(&self) -> &'static str {
        match self {
            Self::Mcd(_) => "mcd",
            Self::Vi { .. } => "vi",
            Self::Hmc { .. } => "hmc",
        }
    }
}

/// One draw from the head posterior. MC dropout draws share the trained weights
/// and differ only in their masks.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSample<'a> {
    pub weights: Cow<'a, [f64]>,
    pub mask: Option<DropoutMask>,
}

impl HeadSample<'_> {
    pub fn logits(&self, head: &NetworkSpec, features: &[f64]) -> Result<Vec<f64>> {
        Ok(logits(head, &self.weights, features, self.mask.as_ref())?)
    }
}

/// Draws `n` head weight samples.
pub fn sample_weights<'a, R: Rng + ?Sized>(post: &'a Posterior, n: usize, rng: &mut R) -> Vec<HeadSample<'a>> {
    match post {
        Posterior::Mcd(m) => (0..n)
            .map(|_| HeadSample {
                weights: Cow::Borrowed(m.head_weights()),
                mask: Some(sample_dropout_mask(m.head_spec(), rng)),
            })
            .collect(),
        Posterior::Vi { mean, log_std, .. } => (0..n)
            .map(|_| {
                let w = mean
                    .iter()
                    .zip(log_std)
                    .map(|(&m, &r)| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + r.exp() * z
                    })
                    .collect();
                HeadSample {
                    weights: Cow::Owned(w),
                    mask: None,
                }
            })
            .collect(),
        Posterior::Hmc { samples, .. } => (0..n)
            .map(|_| HeadSample {
                weights: Cow::Borrowed(samples[rng.random_range(0..samples.len())].as_slice()),
                mask: None,
            })
            .collect(),
    }
}
