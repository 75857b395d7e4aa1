//! Run configuration: one JSON document, every field optional, flags applied on top.

use std::path::{Path, PathBuf};

use bnn_verify::bayes::{HmcConfig, McdConfig, ViConfig};
use bnn_verify::sim::{Disturbance, MapKind, MonitorPolicy, ScenarioConfig, Weather};
use bnn_verify::statcheck::PrecisionSpec;
use bnn_verify::uncertainty::{Binning, DecisionSettings, WarningThresholds};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mcd,
    Vi,
    Hmc,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mcd => "mcd",
            Method::Vi => "vi",
            Method::Hmc => "hmc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSettings,
    /// Steering bins K.
    pub classes: usize,
    pub epsilon: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub mi_threshold: f64,
    /// Posterior samples per real-time decision.
    pub samples: usize,
    /// Speed fraction commanded under W0/W1.
    pub slow_factor: f64,
    pub precision: Precision,
    pub weathers: Vec<Weather>,
    /// Master seed for evaluation and driving.
    pub seed: u64,
    pub collect: CollectSettings,
    pub method: Method,
    /// Prior standard deviation of every head weight (VI and HMC).
    pub prior_scale: f64,
    pub mcd: McdSettings,
    pub vi: ViSettings,
    pub hmc: HmcSettings,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let thresholds = WarningThresholds::default();
        Self {
            scenario: ScenarioSettings::default(),
            classes: 20,
            epsilon: 0.1,
            delta1: thresholds.delta1(),
            delta2: thresholds.delta2(),
            mi_threshold: thresholds.mi_threshold(),
            samples: 32,
            slow_factor: 0.5,
            precision: Precision { theta: 0.05, gamma: 0.05 },
            weathers: Weather::ALL.to_vec(),
            seed: 0,
            collect: CollectSettings::default(),
            method: Method::Mcd,
            prior_scale: 1.0,
            mcd: McdSettings::default(),
            vi: ViSettings::default(),
            hmc: HmcSettings::default(),
            paths: Paths::default(),
        }
    }
}

/// Unvalidated `(θ, γ)`; see [`RunConfig::precision_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Precision {
    pub theta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSettings {
    pub map: MapKind,
    pub nominal_speed: Option<f64>,
    pub horizon: Option<usize>,
    pub dt: Option<f64>,
    pub corridor_half_width: Option<f64>,
    /// Evaluation disturbance; the preset's when absent.
    pub disturbance: Option<Disturbance>,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            map: MapKind::StraightObstacle,
            nominal_speed: None,
            horizon: None,
            dt: None,
            corridor_half_width: None,
            disturbance: None,
        }
    }
}

impl ScenarioSettings {
    pub fn build(&self, weather: Weather) -> Result<ScenarioConfig> {
        let mut s = ScenarioConfig::preset(self.map).with_weather(weather);
        if let Some(v) = self.nominal_speed {
            s.nominal_speed = v;
        }
        if let Some(v) = self.horizon {
            s.horizon = v;
        }
        if let Some(v) = self.dt {
            s.dt = v;
        }
        if let Some(v) = self.corridor_half_width {
            s.corridor_half_width = v;
        }
        if let Some(d) = self.disturbance {
            s.disturbance = d;
        }
        s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSettings {
    pub episodes: usize,
    pub seed: u64,
    pub weather: Weather,
    /// Wider than the evaluation default so the data includes recoveries.
    pub disturbance: Disturbance,
}

impl Default for CollectSettings {
    fn default() -> Self {
        Self {
            episodes: 20,
            seed: 1,
            weather: Weather::Clear,
            disturbance: Disturbance {
                lateral_jitter_sd: 0.4,
                steering_noise_sd: 0.02,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McdSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for McdSettings {
    fn default() -> Self {
        let c = McdConfig::default();
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            seed: 2,
        }
    }
}

impl McdSettings {
    pub fn to_config(self) -> McdConfig {
        McdConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViSettings {
    pub iterations: usize,
    pub mc_samples: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_log_std: f64,
}

impl Default for ViSettings {
    fn default() -> Self {
        let c = ViConfig::default();
        Self {
            iterations: c.iterations,
            mc_samples: c.mc_samples,
            learning_rate: c.learning_rate,
            seed: 3,
            init_log_std: c.init_log_std,
        }
    }
}

impl ViSettings {
    pub fn to_config(self) -> ViConfig {
        ViConfig {
            iterations: self.iterations,
            mc_samples: self.mc_samples,
            learning_rate: self.learning_rate,
            seed: self.seed,
            init_log_std: self.init_log_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcSettings {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl Default for HmcSettings {
    fn default() -> Self {
        let c = HmcConfig::default();
        Self {
            step_size: c.step_size,
            leapfrog_steps: c.leapfrog_steps,
            burn_in: c.burn_in,
            samples: c.samples,
            thinning: c.thinning,
            seed: 4,
        }
    }
}

impl HmcSettings {
    pub fn to_config(self) -> HmcConfig {
        HmcConfig {
            step_size: self.step_size,
            leapfrog_steps: self.leapfrog_steps,
            burn_in: self.burn_in,
            samples: self.samples,
            thinning: self.thinning,
        }
    }

    /// Number of recorded HMC iterations.
    pub fn iterations(&self) -> usize {
        self.burn_in + self.samples * self.thinning
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Dropout network supplying features for VI and HMC.
    pub mcd_model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn precision_spec(&self) -> Result<PrecisionSpec> {
        PrecisionSpec::new(self.precision.theta, self.precision.gamma).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn thresholds(&self) -> Result<WarningThresholds> {
        WarningThresholds::new(self.delta1, self.delta2, self.mi_threshold).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn binning(&self) -> Result<Binning> {
        Binning::new(self.classes).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn decision_settings(&self) -> Result<DecisionSettings> {
        Ok(DecisionSettings {
            bins: self.binning()?,
            epsilon: self.epsilon,
            samples: self.samples,
            thresholds: self.thresholds()?,
        })
    }

    pub fn monitor(&self) -> Result<MonitorPolicy> {
        Ok(MonitorPolicy {
            thresholds: self.thresholds()?,
            slow_factor: self.slow_factor,
        })
    }

    /// Checks everything that can be checked without touching files.
    pub fn validate(&self) -> Result<()> {
        self.precision_spec()?;
        self.thresholds()?;
        self.binning()?;
        if !(self.epsilon > 0.0) || self.samples == 0 {
            return Err(CliError::Usage("epsilon and samples must be positive".into()));
        }
        if !(self.slow_factor > 0.0 && self.slow_factor <= 1.0) {
            return Err(CliError::Usage("slow_factor must lie in (0, 1]".into()));
        }
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            return Err(CliError::Usage("prior_scale must be positive".into()));
        }
        if self.weathers.is_empty() {
            return Err(CliError::Usage("the weather grid is empty".into()));
        }
        self.scenario.build(Weather::Clear)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_slice(&serde_json::to_vec(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.precision_spec().unwrap().sample_size(), 738);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 9, "mcd": {"epochs": 3}, "weathers": ["rain"]}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.mcd.epochs, 3);
        assert_eq!(c.mcd.batch_size, 16);
        assert_eq!(c.weathers, vec![Weather::Rain]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 9}"#).is_err());
    }

    #[test]
    fn threshold_order_is_enforced() {
        let c = RunConfig {
            delta1: 0.5,
            delta2: 0.6,
            ..RunConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
