//! From posterior samples to a steering decision and how much to trust it.
//!
//! Steering angles in `[-1, 1]` are discretized into `K` equal bins. The deployed
//! decision is the argmax of the mean predictive; its confidence `η₂` is the share
//! of sampled networks whose own argmax lands within `ε` of the decision, and the
//! mutual information (BALD) measures disagreement between samples.

mod controller;

pub use controller::{BayesianController, DecisionSettings};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{sample_weights, BayesError, Posterior};
use crate::nn::softmax;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid predictive distribution: {0}")]
    InvalidPredictive(String),
}

pub type Result<T> = std::result::Result<T, UncertaintyError>;

/// Default number of weight samples per real-time decision.
pub const DEFAULT_SAMPLES: usize = 32;
/// Default radius of the ε-ball around the decision (one bin width for K = 20).
pub const DEFAULT_EPSILON: f64 = 0.1;

/// `K` equal-width bins over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    k: usize,
    lo: f64,
    hi: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Self { k: 20, lo: -1.0, hi: 1.0 }
    }
}

impl Binning {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(UncertaintyError::InvalidConfig(format!("need at least 2 bins, got {k}")));
        }
        Ok(Self { k, ..Self::default() })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.k as f64
    }

    pub fn bin_center(&self, class: usize) -> f64 {
        self.lo + (class as f64 + 0.5) * self.width()
    }

    /// Angles outside the range are clamped; the top edge falls into the last bin.
    pub fn steering_to_class(&self, angle: f64) -> usize {
        let a = if angle.is_nan() { 0.0 } else { angle.clamp(self.lo, self.hi) };
        (((a - self.lo) / self.width()).floor() as usize).min(self.k - 1)
    }
}

/// Softmax outputs of `n` sampled networks and their average.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    per_sample: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

impl PredictiveDistribution {
    /// Rows must be probability vectors of equal length.
    pub fn new(per_sample: Vec<Vec<f64>>) -> Result<Self> {
        let bad = |m: String| Err(UncertaintyError::InvalidPredictive(m));
        let Some(first) = per_sample.first() else {
            return bad("no samples".into());
        };
        let k = first.len();
        if k == 0 {
            return bad("empty rows".into());
        }
        for (i, row) in per_sample.iter().enumerate() {
            if row.len() != k {
                return bad(format!("row {i} has {} entries, expected {k}", row.len()));
            }
            if row.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("row {i} is not a probability vector"));
            }
        }
        let n = per_sample.len() as f64;
        let mut mean = vec![0.0; k];
        for row in &per_sample {
            for (m, p) in mean.iter_mut().zip(row) {
                *m += p;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(Self { per_sample, mean })
    }

    pub fn per_sample_probs(&self) -> &[Vec<f64>] {
        &self.per_sample
    }

    pub fn mean_probs(&self) -> &[f64] {
        &self.mean
    }

    pub fn n_samples(&self) -> usize {
        self.per_sample.len()
    }

    pub fn classes(&self) -> usize {
        self.mean.len()
    }
}

/// Draws `n` head samples and evaluates them on extractor features.
pub fn predictive<R: Rng + ?Sized>(post: &Posterior, features: &[f64], n: usize, rng: &mut R) -> Result<PredictiveDistribution> {
    if n == 0 {
        return Err(UncertaintyError::InvalidConfig("at least one weight sample".into()));
    }
    let head = post.head_spec();
    let rows = sample_weights(post, n, rng)
        .iter()
        .map(|s| Ok(softmax(&s.logits(head, features)?)))
        .collect::<Result<Vec<_>>>()?;
    PredictiveDistribution::new(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub class_index: usize,
    pub steering: f64,
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The most likely class of the mean predictive, ties to the smaller index.
pub fn decide(pred: &PredictiveDistribution, bins: &Binning) -> Decision {
    let class_index = argmax(pred.mean_probs());
    Decision {
        class_index,
        steering: bins.bin_center(class_index),
    }
}

/// Fraction of samples whose own most likely class has its bin center within `eps`
/// of the decision.
pub fn decision_confidence(pred: &PredictiveDistribution, decision: &Decision, eps: f64, bins: &Binning) -> f64 {
    // Bin-center distances are multiples of the width up to rounding; the slack
    // keeps a distance of exactly eps inside the ball.
    let radius = eps + 1e-9 * bins.width();
    let inside = pred
        .per_sample_probs()
        .iter()
        .filter(|row| (bins.bin_center(argmax(row)) - decision.steering).abs() <= radius)
        .count();
    inside as f64 / pred.n_samples() as f64
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// BALD mutual information in nats: `H(mean) - mean_i H(row_i)`.
pub fn mutual_information(pred: &PredictiveDistribution) -> f64 {
    let mean_h = pred.per_sample_probs().iter().map(|r| entropy(r)).sum::<f64>() / pred.n_samples() as f64;
    let k = pred.classes() as f64;
    (entropy(pred.mean_probs()) - mean_h).clamp(0.0, k.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Warning {
    None,
    W0,
    W1,
    W2,
}

impl Warning {
    /// Log representation; no warning is an empty field.
    pub fn as_str(&self) -> &'static str {
        match self {
            Warning::None => "",
            Warning::W0 => "W0",
            Warning::W1 => "W1",
            Warning::W2 => "W2",
        }
    }
}

/// Thresholds of the three warning tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningThresholds {
    delta1: f64,
    delta2: f64,
    mi_threshold: f64,
}

impl Default for WarningThresholds {
    fn default() -> Self {
        Self {
            delta1: 0.7,
            delta2: 0.6,
            mi_threshold: 0.45,
        }
    }
}

impl WarningThresholds {
    /// Requires `delta2 < delta1`.
    pub fn new(delta1: f64, delta2: f64, mi_threshold: f64) -> Result<Self> {
        if !(delta2 < delta1) || !mi_threshold.is_finite() {
            return Err(UncertaintyError::InvalidConfig(format!(
                "need delta2 < delta1 and a finite MI threshold (delta1 = {delta1}, delta2 = {delta2}, mi = {mi_threshold})"
            )));
        }
        Ok(Self {
            delta1,
            delta2,
            mi_threshold,
        })
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn mi_threshold(&self) -> f64 {
        self.mi_threshold
    }

    pub fn classify(&self, eta2: f64, mi: f64) -> Warning {
        classify_warning(eta2, mi, self)
    }
}

pub fn classify_warning(eta2: f64, mi: f64, t: &WarningThresholds) -> Warning {
    if eta2 < t.delta2 {
        Warning::W2
    } else if eta2 < t.delta1 {
        Warning::W1
    } else if mi > t.mi_threshold {
        Warning::W0
    } else {
        Warning::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub eta2: f64,
    pub mutual_info: f64,
    pub warning: Warning,
    pub n_samples: usize,
}

/// Decision plus its confidence report for one predictive distribution.
pub fn assess(pred: &PredictiveDistribution, bins: &Binning, eps: f64, thresholds: &WarningThresholds) -> (Decision, ConfidenceReport) {
    let decision = decide(pred, bins);
    let eta2 = decision_confidence(pred, &decision, eps, bins);
    let mutual_info = mutual_information(pred);
    let report = ConfidenceReport {
        eta2,
        mutual_info,
        warning: thresholds.classify(eta2, mutual_info),
        n_samples: pred.n_samples(),
    };
    (decision, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(k: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        v
    }

    #[test]
    fn bin_arithmetic() {
        let b = Binning::default();
        assert_eq!(b.steering_to_class(-1.0), 0);
        assert_eq!(b.steering_to_class(1.0), 19);
        assert_eq!(b.steering_to_class(0.0), 10);
        assert!((b.bin_center(10) - 0.05).abs() < 1e-15);
        assert_eq!(b.steering_to_class(-3.0), 0);
        assert_eq!(b.steering_to_class(7.0), 19);
        assert!(Binning::new(1).is_err());
    }

    #[test]
    fn decide_examples() {
        let b = Binning::default();
        let p = PredictiveDistribution::new(vec![one_hot(20, 7)]).unwrap();
        let d = decide(&p, &b);
        assert_eq!(d.class_index, 7);
        assert!((d.steering + 0.25).abs() < 1e-12);
        let mut tie = vec![0.0; 20];
        tie[3] = 0.5;
        tie[9] = 0.5;
        assert_eq!(decide(&PredictiveDistribution::new(vec![tie]).unwrap(), &b).class_index, 3);
        let uniform = PredictiveDistribution::new(vec![vec![0.05; 20]]).unwrap();
        assert_eq!(decide(&uniform, &b).class_index, 0);
    }

    #[test]
    fn confidence_counts_votes() {
        let b = Binning::default();
        let rows: Vec<_> = (0..10).map(|i| one_hot(20, if i < 7 { 5 } else { 15 })).collect();
        let p = PredictiveDistribution::new(rows).unwrap();
        let d = decide(&p, &b);
        assert_eq!(decision_confidence(&p, &d, 0.1, &b), 0.7);
    }

    #[test]
    fn adjacent_bins_are_inside_one_width() {
        let b = Binning::default();
        for c in 1..19 {
            let rows = vec![one_hot(20, c), one_hot(20, c), one_hot(20, c - 1), one_hot(20, c + 1)];
            let p = PredictiveDistribution::new(rows).unwrap();
            let d = decide(&p, &b);
            assert_eq!(d.class_index, c);
            assert_eq!(decision_confidence(&p, &d, 0.1, &b), 1.0);
            let rows = vec![one_hot(20, c), one_hot(20, c), one_hot(20, (c + 2) % 20)];
            let p = PredictiveDistribution::new(rows).unwrap();
            assert!((decision_confidence(&p, &decide(&p, &b), 0.1, &b) - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mutual_information_examples() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let mi = mutual_information(&PredictiveDistribution::new(rows).unwrap());
        assert!((mi - 2f64.ln()).abs() < 1e-9);
        let same = vec![vec![0.2, 0.3, 0.5]; 6];
        assert!(mutual_information(&PredictiveDistribution::new(same).unwrap()) <= 1e-9);
    }

    #[test]
    fn warning_tiers() {
        let t = WarningThresholds::default();
        assert_eq!(t.classify(0.55, 0.0), Warning::W2);
        assert_eq!(t.classify(0.55, 2.0), Warning::W2);
        assert_eq!(t.classify(0.65, 0.1), Warning::W1);
        assert_eq!(t.classify(0.9, 0.5), Warning::W0);
        assert_eq!(t.classify(0.9, 0.1), Warning::None);
        assert!(WarningThresholds::new(0.6, 0.6, 0.45).is_err());
        assert!(WarningThresholds::new(0.6, 0.7, 0.45).is_err());
    }

    #[test]
    fn predictive_rejects_bad_rows() {
        assert!(PredictiveDistribution::new(vec![]).is_err());
        assert!(PredictiveDistribution::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(PredictiveDistribution::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }
}
