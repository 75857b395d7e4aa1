use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::nn::{
    init_weights, logits, loss_and_gradient, sample_dropout_mask, AdamState, NetworkSpec, Tensor,
};
use crate::rng;

use super::{BayesError, FeatureDataset, McdPosterior, Result};

/// Images with class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageDataset {
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl ImageDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, image: Tensor, label: usize) {
        self.images.push(image);
        self.labels.push(label);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McdConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for McdConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 16,
            learning_rate: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McdReport {
    /// Mean training loss (with dropout active) per epoch.
    pub epoch_losses: Vec<f64>,
    /// Accuracy of the mask-free network on the training set.
    pub train_accuracy: f64,
}

/// Trains the whole network with dropout active, drawing a fresh mask per example.
///
/// Examples of a batch are evaluated in parallel; masks are drawn sequentially
/// beforehand and gradients are summed in example order, so the result does not
/// depend on the thread count.
pub fn train_mcd(
    data: &ImageDataset,
    spec: &NetworkSpec,
    head_start: usize,
    cfg: &McdConfig,
) -> Result<(McdPosterior, McdReport)> {
    if data.is_empty() {
        return Err(BayesError::EmptyDataset);
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(BayesError::InvalidConfig(
            "batch size and learning rate must be positive".into(),
        ));
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut w = init_weights(spec, &mut rng);
    let mut adam = AdamState::new(w.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let masks: Vec<_> = batch.iter().map(|_| sample_dropout_mask(spec, &mut rng)).collect();
            let parts: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(&i, mask)| {
                    let mut g = vec![0.0; w.len()];
                    let (loss, _) = loss_and_gradient(spec, &w.0, data.images[i].data(), data.labels[i], Some(mask), &mut g)?;
                    Ok((loss, g))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; w.len()];
            for (loss, g) in &parts {
                epoch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v * scale;
                }
            }
            adam.update(&mut w.0, &grad)?;
        }
        epoch_losses.push(epoch_loss / data.len() as f64);
    }
    let correct = data
        .images
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| {
            let z = logits(spec, &w.0, x.data(), None)?;
            Ok(usize::from(argmax(&z) == y))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let report = McdReport {
        epoch_losses,
        train_accuracy: correct as f64 / data.len() as f64,
    };
    Ok((McdPosterior::new(spec.clone(), w, head_start)?, report))
}

/// Mask-free output of the frozen extractor for one image.
pub fn extract_features(mcd: &McdPosterior, image: &Tensor) -> Result<Vec<f64>> {
    if image.shape() != mcd.spec().input_shape() {
        return Err(crate::nn::NnError::Shape {
            expected: mcd.spec().input_shape().to_vec(),
            actual: image.shape().to_vec(),
        }
        .into());
    }
    mcd.features(image.data())
}

/// Features for every image of a dataset.
pub fn feature_dataset(mcd: &McdPosterior, data: &ImageDataset) -> Result<FeatureDataset> {
    let features = data
        .images
        .par_iter()
        .map(|x| extract_features(mcd, x))
        .collect::<Result<Vec<_>>>()?;
    let dim = mcd.head_spec().input_shape()[0];
    FeatureDataset::new(features, data.labels.clone(), dim, mcd.head_spec().num_classes())
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::MCD_RATES;

    /// 48x64 images, bright on the left half (class 0) or the right half (class 1).
    fn left_right(n: usize) -> ImageDataset {
        let mut data = ImageDataset::default();
        for i in 0..n {
            let label = i % 2;
            let jitter = (i as f64 * 0.37).sin() * 0.1;
            let pixels = (0..48 * 64)
                .map(|p| {
                    let left = p % 64 < 32;
                    if left == (label == 0) {
                        0.8 + jitter
                    } else {
                        0.2 - jitter
                    }
                })
                .collect();
            data.push(Tensor::new(vec![48, 64, 1], pixels).unwrap(), label);
        }
        data
    }

    fn two_class_spec() -> NetworkSpec {
        NetworkSpec::steering(2, MCD_RATES).unwrap()
    }

    #[test]
    fn separable_images_are_learned() {
        let data = left_right(64);
        let cfg = McdConfig {
            seed: 7,
            ..McdConfig::default()
        };
        let (_, report) = train_mcd(&data, &two_class_spec(), 9, &cfg).unwrap();
        assert!(report.train_accuracy >= 0.95, "accuracy {}", report.train_accuracy);
        assert_eq!(report.epoch_losses.len(), 25);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = left_right(4);
        let spec = two_class_spec();
        let cfg = McdConfig {
            epochs: 0,
            seed: 3,
            ..McdConfig::default()
        };
        let (post, _) = train_mcd(&data, &spec, 9, &cfg).unwrap();
        assert_eq!(post.weights(), &init_weights(&spec, &mut rng::seeded(3)));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = left_right(8);
        let cfg = McdConfig {
            epochs: 2,
            seed: 5,
            ..McdConfig::default()
        };
        let a = train_mcd(&data, &two_class_spec(), 9, &cfg).unwrap();
        let b = train_mcd(&data, &two_class_spec(), 9, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_dataset_rejected() {
        let r = train_mcd(&ImageDataset::default(), &two_class_spec(), 9, &McdConfig::default());
        assert_eq!(r.unwrap_err(), BayesError::EmptyDataset);
    }

    #[test]
    fn features_of_blank_image() {
        let spec = two_class_spec();
        // He initialization leaves every bias at zero.
        let mut w = init_weights(&spec, &mut rng::seeded(1));
        let post = McdPosterior::new(spec.clone(), w.clone(), 9).unwrap();
        let zero = Tensor::zeros(vec![48, 64, 1]);
        let f = extract_features(&post, &zero).unwrap();
        assert_eq!(f, vec![0.0; 64]);
        w.0.iter_mut().for_each(|v| *v += 0.01);
        let post = McdPosterior::new(spec, w, 9).unwrap();
        let img = Tensor::new(vec![48, 64, 1], vec![0.5; 3072]).unwrap();
        assert_eq!(extract_features(&post, &img).unwrap().len(), 64);
        assert!(extract_features(&post, &Tensor::zeros(vec![64, 48, 1])).is_err());
    }
}
