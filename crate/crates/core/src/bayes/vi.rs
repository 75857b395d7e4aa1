use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{AdamState, NetworkSpec};
use crate::rng;

use super::{check_len, BayesError, FeatureDataset, HeadLikelihood, Likelihood, Posterior, Prior, Result};

/// Closed-form `KL(q ‖ prior)` for a diagonal Gaussian `q = N(mean, exp(log_std)²)`.
pub fn kl_to_prior(mean: &[f64], log_std: &[f64], prior: &Prior) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(prior.scales())
        .map(|((&m, &r), &s)| {
            let var_ratio = (2.0 * r).exp() / (s * s);
            s.ln() - r + 0.5 * (var_ratio + m * m / (s * s)) - 0.5
        })
        .sum()
}

/// Reparameterized ELBO estimate and its gradient with respect to the mean and the
/// log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboGradient {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub elbo: f64,
}

/// Samples `w = mean + exp(log_std) ⊙ ζ` with `ζ ~ N(0, I)` (`samples` times) and
/// differentiates `E[log p(D | w)] - KL(q ‖ prior)`.
pub fn elbo_gradient<L: Likelihood + ?Sized, R: Rng + ?Sized>(
    model: &L,
    prior: &Prior,
    mean: &[f64],
    log_std: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<ElboGradient> {
    let d = model.dim();
    check_len(d, mean.len())?;
    check_len(d, log_std.len())?;
    check_len(d, prior.dim())?;
    if samples == 0 {
        return Err(BayesError::InvalidConfig("at least one Monte Carlo sample".into()));
    }
    let std: Vec<f64> = log_std.iter().map(|r| r.exp()).collect();
    let inv = 1.0 / samples as f64;
    let mut g_mean = vec![0.0; d];
    let mut g_log_std = vec![0.0; d];
    let mut expected_ll = 0.0;
    let mut zeta = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut g_w = vec![0.0; d];
    for _ in 0..samples {
        for i in 0..d {
            zeta[i] = rng.sample(StandardNormal);
            w[i] = mean[i] + std[i] * zeta[i];
        }
        g_w.iter_mut().for_each(|g| *g = 0.0);
        let nll = model.neg_log_likelihood(&w, &mut g_w)?;
        expected_ll -= nll * inv;
        for i in 0..d {
            g_mean[i] -= g_w[i] * inv;
            g_log_std[i] -= g_w[i] * zeta[i] * std[i] * inv;
        }
    }
    let kl = kl_to_prior(mean, log_std, prior);
    for i in 0..d {
        let s2 = prior.scales()[i].powi(2);
        g_mean[i] -= mean[i] / s2;
        g_log_std[i] -= std[i] * std[i] / s2 - 1.0;
    }
    let elbo = expected_ll - kl;
    if !elbo.is_finite() || g_mean.iter().chain(&g_log_std).any(|v| !v.is_finite()) {
        return Err(BayesError::NonFinite("ELBO gradient"));
    }
    Ok(ElboGradient {
        mean: g_mean,
        log_std: g_log_std,
        elbo,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViConfig {
    pub iterations: usize,
    /// Monte Carlo samples per gradient.
    pub mc_samples: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Starting log standard deviation for every weight.
    pub init_log_std: f64,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            mc_samples: 1,
            learning_rate: 1e-3,
            seed: 0,
            init_log_std: (1e-2f64).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViRun {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// ELBO estimate at every iteration.
    pub elbo_trace: Vec<f64>,
}

/// ADAM ascent on the ELBO from `init_mean` and `cfg.init_log_std`.
pub fn fit_vi<L: Likelihood + ?Sized>(model: &L, prior: &Prior, init_mean: &[f64], cfg: &ViConfig) -> Result<ViRun> {
    check_len(model.dim(), init_mean.len())?;
    if cfg.mc_samples == 0 || !(cfg.learning_rate > 0.0) || !cfg.init_log_std.is_finite() {
        return Err(BayesError::InvalidConfig(
            "mc_samples and learning rate must be positive, init_log_std finite".into(),
        ));
    }
    let d = model.dim();
    let mut rng = rng::seeded(cfg.seed);
    // params = [mean; log_std]
    let mut params: Vec<f64> = init_mean.iter().copied().chain(std::iter::repeat_n(cfg.init_log_std, d)).collect();
    let mut adam = AdamState::new(2 * d, cfg.learning_rate);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut descent = vec![0.0; 2 * d];
    for _ in 0..cfg.iterations {
        let (mean, log_std) = params.split_at(d);
        let g = elbo_gradient(model, prior, mean, log_std, cfg.mc_samples, &mut rng)?;
        trace.push(g.elbo);
        for (dst, src) in descent.iter_mut().zip(g.mean.iter().chain(&g.log_std)) {
            *dst = -src;
        }
        adam.update(&mut params, &descent)?;
    }
    let log_std = params.split_off(d);
    Ok(ViRun {
        mean: params,
        log_std,
        elbo_trace: trace,
    })
}

/// Mean-field VI over a head network.
pub fn train_vi(
    data: &FeatureDataset,
    head: &NetworkSpec,
    prior: &Prior,
    init_mean: &[f64],
    cfg: &ViConfig,
) -> Result<(Posterior, ViRun)> {
    if data.is_empty() {
        return Err(BayesError::EmptyDataset);
    }
    let model = HeadLikelihood { spec: head, data };
    let run = fit_vi(&model, prior, init_mean, cfg)?;
    let post = Posterior::vi(head.clone(), run.mean.clone(), run.log_std.clone())?;
    Ok((post, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::GaussianMean;

    #[test]
    fn kl_vanishes_at_prior() {
        let prior = Prior::isotropic(3, 0.7).unwrap();
        let kl = kl_to_prior(&[0.0; 3], &[(0.7f64).ln(); 3], &prior);
        assert!(kl.abs() < 1e-12);
    }

    #[test]
    fn empty_data_gradient_is_minus_kl_gradient() {
        let model = GaussianMean {
            observations: vec![],
            noise_sd: 1.0,
        };
        let prior = Prior::isotropic(1, 2.0).unwrap();
        let g = elbo_gradient(&model, &prior, &[0.0], &[(2.0f64).ln()], 1, &mut rng::seeded(1)).unwrap();
        assert!(g.mean[0].abs() < 1e-12 && g.log_std[0].abs() < 1e-12);
        let g = elbo_gradient(&model, &prior, &[0.8], &[0.1], 1, &mut rng::seeded(1)).unwrap();
        assert!((g.mean[0] + 0.8 / 4.0).abs() < 1e-12);
        assert!((g.log_std[0] + ((0.2f64).exp() / 4.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_returns_init() {
        let model = GaussianMean {
            observations: vec![1.0],
            noise_sd: 1.0,
        };
        let prior = Prior::isotropic(1, 1.0).unwrap();
        let cfg = ViConfig {
            iterations: 0,
            init_log_std: -1.0,
            ..ViConfig::default()
        };
        let run = fit_vi(&model, &prior, &[0.3], &cfg).unwrap();
        assert_eq!(run.mean, vec![0.3]);
        assert_eq!(run.log_std, vec![-1.0]);
        assert!(run.elbo_trace.is_empty());
    }

    #[test]
    fn train_vi_rejects_empty_data() {
        let head = NetworkSpec::steering_head(20, [0.0; 3]).unwrap();
        let prior = Prior::uniform(&head, 1.0).unwrap();
        let init = vec![0.0; head.param_count()];
        let r = train_vi(&FeatureDataset::empty(), &head, &prior, &init, &ViConfig::default());
        assert_eq!(r.unwrap_err(), BayesError::EmptyDataset);
    }
}
