use crate::bayes::{McdPosterior, Posterior};
use crate::rng::Rng;
use crate::sim::{ControlOutput, Controller, Observation, ScenarioConfig, VehicleState};

use super::{assess, predictive, Binning, Result, UncertaintyError, WarningThresholds, DEFAULT_EPSILON, DEFAULT_SAMPLES};

/// How a predictive distribution becomes a decision and a confidence report.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecisionSettings {
    pub bins: Binning,
    pub epsilon: f64,
    /// Weight samples per decision.
    pub samples: usize,
    pub thresholds: WarningThresholds,
}

impl Default for DecisionSettings {
    fn default() -> Self {
        Self {
            bins: Binning::default(),
            epsilon: DEFAULT_EPSILON,
            samples: DEFAULT_SAMPLES,
            thresholds: WarningThresholds::default(),
        }
    }
}

/// Camera frame → frozen extractor → sampled heads → decision and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianController {
    extractor: McdPosterior,
    posterior: Posterior,
    settings: DecisionSettings,
}

impl BayesianController {
    /// `extractor` supplies the feature layers; `posterior` the head distribution.
    pub fn new(extractor: McdPosterior, posterior: Posterior, settings: DecisionSettings) -> Result<Self> {
        let features = extractor.head_spec().input_shape();
        let head = posterior.head_spec();
        if head.input_shape() != features {
            return Err(UncertaintyError::InvalidConfig(format!(
                "head expects input {:?}, extractor produces {:?}",
                head.input_shape(),
                features
            )));
        }
        if head.num_classes() != settings.bins.classes() {
            return Err(UncertaintyError::InvalidConfig(format!(
                "head has {} classes, binning has {}",
                head.num_classes(),
                settings.bins.classes()
            )));
        }
        if settings.samples == 0 || !(settings.epsilon > 0.0) {
            return Err(UncertaintyError::InvalidConfig("samples and epsilon must be positive".into()));
        }
        Ok(Self {
            extractor,
            posterior,
            settings,
        })
    }

    /// MC dropout controller: the network is both extractor and posterior.
    pub fn mcd(model: McdPosterior, settings: DecisionSettings) -> Result<Self> {
        Self::new(model.clone(), Posterior::Mcd(model), settings)
    }

    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn settings(&self) -> &DecisionSettings {
        &self.settings
    }

    pub fn features(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.extractor.features(obs.to_tensor().data())?)
    }
}

impl Controller for BayesianController {
    fn control(
        &self,
        obs: Option<&Observation>,
        _state: &VehicleState,
        _scenario: &ScenarioConfig,
        rng: &mut Rng,
    ) -> std::result::Result<ControlOutput, String> {
        let obs = obs.ok_or("no camera frame")?;
        let mut run = || -> Result<ControlOutput> {
            let features = self.features(obs)?;
            let pred = predictive(&self.posterior, &features, self.settings.samples, rng)?;
            let s = &self.settings;
            let (decision, report) = assess(&pred, &s.bins, s.epsilon, &s.thresholds);
            Ok(ControlOutput {
                steering: decision.steering,
                report: Some(report),
            })
        };
        run().map_err(|e| e.to_string())
    }
}
