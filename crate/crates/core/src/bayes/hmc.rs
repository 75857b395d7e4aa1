use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{NetworkSpec, WeightVector};

use super::{check_len, BayesError, FeatureDataset, HeadLikelihood, Likelihood, Posterior, Prior, Result};

/// `U(w) = -log p(D | w) - log p(w)` up to a constant, with its gradient.
pub fn potential_energy<L: Likelihood + ?Sized>(model: &L, prior: &Prior, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(model.dim(), w.len())?;
    check_len(model.dim(), prior.dim())?;
    let mut grad = vec![0.0; w.len()];
    let nll = model.neg_log_likelihood(w, &mut grad)?;
    let u = nll + prior.neg_log_density(w, &mut grad);
    if !u.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(BayesError::NonFinite("potential energy"));
    }
    Ok((u, grad))
}

/// `steps` leapfrog steps of size `step` for `H(q, p) = U(q) + |p|²/2`.
pub fn leapfrog<F>(q: &[f64], p: &[f64], step: f64, steps: usize, mut grad_u: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    check_len(q.len(), p.len())?;
    let g0 = grad_u(q)?;
    let (q, p, _) = integrate(q.to_vec(), p.to_vec(), g0, step, steps, |x| Ok(((), grad_u(x)?)))?;
    Ok((q, p))
}

/// Leapfrog that starts from a known gradient and returns the final evaluation of
/// `f` (value and gradient) so HMC never recomputes the potential.
fn integrate<T, F>(
    mut q: Vec<f64>,
    mut p: Vec<f64>,
    mut g: Vec<f64>,
    step: f64,
    steps: usize,
    mut f: F,
) -> Result<(Vec<f64>, Vec<f64>, Option<(T, Vec<f64>)>)>
where
    F: FnMut(&[f64]) -> Result<(T, Vec<f64>)>,
{
    let mut last = None;
    for (pi, gi) in p.iter_mut().zip(&g) {
        *pi -= 0.5 * step * gi;
    }
    for l in 0..steps {
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step * pi;
        }
        let (value, grad) = f(&q)?;
        g = grad;
        let kick = if l + 1 == steps { 0.5 * step } else { step };
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi -= kick * gi;
        }
        last = Some((value, g.clone()));
    }
    Ok((q, p, last))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub burn_in: usize,
    /// Number of retained samples.
    pub samples: usize,
    /// Keep one of every `thinning` post-burn-in iterations.
    pub thinning: usize,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            leapfrog_steps: 10,
            burn_in: 500,
            samples: 1000,
            thinning: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcRun {
    pub samples: Vec<WeightVector>,
    /// Accepted proposals over all iterations, burn-in included.
    pub acceptance_rate: f64,
}

/// Metropolis-adjusted Hamiltonian Monte Carlo with unit mass matrix. Momentum is
/// redrawn every iteration; proposals with a non-finite energy are rejected.
pub fn run_hmc<L: Likelihood + ?Sized, R: Rng + ?Sized>(
    model: &L,
    prior: &Prior,
    init: &[f64],
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<HmcRun> {
    if !(cfg.step_size > 0.0) || cfg.leapfrog_steps == 0 || cfg.samples == 0 || cfg.thinning == 0 {
        return Err(BayesError::InvalidConfig(
            "step size, leapfrog steps, samples and thinning must be positive".into(),
        ));
    }
    let d = init.len();
    let (mut u, mut g) = potential_energy(model, prior, init)?;
    let mut q = init.to_vec();
    let total = cfg.burn_in + cfg.samples * cfg.thinning;
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(cfg.samples);
    for it in 0..total {
        let p0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let h0 = u + kinetic(&p0);
        let proposal = integrate(q.clone(), p0, g.clone(), cfg.step_size, cfg.leapfrog_steps, |x| {
            potential_energy(model, prior, x)
        });
        // A uniform draw is consumed every iteration so the stream stays aligned
        // whether or not the proposal could be evaluated.
        let coin: f64 = rng.random();
        if let Ok((q1, p1, Some((u1, g1)))) = proposal {
            let h1 = u1 + kinetic(&p1);
            if h1.is_finite() && coin < (h0 - h1).exp().min(1.0) {
                q = q1;
                u = u1;
                g = g1;
                accepted += 1;
            }
        }
        if it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thinning == 0 {
            samples.push(WeightVector(q.clone()));
        }
    }
    Ok(HmcRun {
        samples,
        acceptance_rate: accepted as f64 / total as f64,
    })
}

/// HMC over a head network, started at `init` (typically the dropout-trained head).
pub fn train_hmc<R: Rng + ?Sized>(
    data: &FeatureDataset,
    head: &NetworkSpec,
    prior: &Prior,
    init: &[f64],
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<(Posterior, HmcRun)> {
    let model = HeadLikelihood { spec: head, data };
    let run = run_hmc(&model, prior, init, cfg, rng)?;
    let post = Posterior::hmc(head.clone(), run.samples.clone())?;
    Ok((post, run))
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}
