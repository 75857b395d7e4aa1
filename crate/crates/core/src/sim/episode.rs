use rand::{Rng as _, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::uncertainty::{Binning, ConfidenceReport, Warning, WarningThresholds};

use super::camera::{apply_weather, render, Observation};
use super::dynamics::{step, VehicleState};
use super::geometry::Rect;
use super::scenario::ScenarioConfig;
use super::{Result, SimError};

/// Pure-pursuit lookahead distance (m).
pub const LOOKAHEAD: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyStatus {
    Safe,
    Collision,
    OutOfBounds,
}

pub fn footprint(s: &VehicleState, scenario: &ScenarioConfig) -> Rect {
    Rect {
        center: s.position(),
        heading: s.heading,
        half_length: scenario.vehicle.length / 2.0,
        half_width: scenario.vehicle.width / 2.0,
    }
}

/// Obstacle overlap takes precedence over leaving the corridor.
pub fn safety_status(s: &VehicleState, scenario: &ScenarioConfig) -> SafetyStatus {
    if scenario.obstacle.as_ref().is_some_and(|o| o.overlaps(&footprint(s, scenario))) {
        SafetyStatus::Collision
    } else if scenario.centerline.project(s.position()).lateral.abs() > scenario.corridor_half_width {
        SafetyStatus::OutOfBounds
    } else {
        SafetyStatus::Safe
    }
}

pub fn is_safe(s: &VehicleState, scenario: &ScenarioConfig) -> bool {
    safety_status(s, scenario) == SafetyStatus::Safe
}

/// Pure pursuit toward the centerline point `LOOKAHEAD` metres ahead of the
/// vehicle's projection, as a normalized steering command.
pub fn autopilot(s: &VehicleState, scenario: &ScenarioConfig) -> f64 {
    let path = &scenario.centerline;
    let here = path.project(s.position());
    let ((tx, ty), _) = path.pose_at(here.s + LOOKAHEAD);
    let (dx, dy) = (tx - s.x, ty - s.y);
    let (sin_h, cos_h) = s.heading.sin_cos();
    let (ahead, left) = (cos_h * dx + sin_h * dy, -sin_h * dx + cos_h * dy);
    let dist2 = ahead * ahead + left * left;
    if dist2 < 1e-12 {
        return 0.0;
    }
    let curvature = 2.0 * left / dist2;
    let delta = (scenario.vehicle.wheelbase * curvature).atan();
    (delta / scenario.vehicle.max_steer).clamp(-1.0, 1.0)
}

/// A controller's output for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub steering: f64,
    pub report: Option<ConfidenceReport>,
}

pub trait Controller: Sync {
    /// Whether `control` looks at the camera frame; frames are not rendered otherwise.
    fn needs_observation(&self) -> bool {
        true
    }

    fn control(
        &self,
        obs: Option<&Observation>,
        state: &VehicleState,
        scenario: &ScenarioConfig,
        rng: &mut Rng,
    ) -> std::result::Result<ControlOutput, String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Autopilot;

impl Controller for Autopilot {
    fn needs_observation(&self) -> bool {
        false
    }

    fn control(
        &self,
        _obs: Option<&Observation>,
        state: &VehicleState,
        scenario: &ScenarioConfig,
        _rng: &mut Rng,
    ) -> std::result::Result<ControlOutput, String> {
        Ok(ControlOutput {
            steering: autopilot(state, scenario),
            report: None,
        })
    }
}

/// Tiered reaction to the controller's confidence: slow down on W0/W1, brake to a
/// standstill and hand over on W2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorPolicy {
    pub thresholds: WarningThresholds,
    /// Fraction of the nominal speed commanded under W0 and W1.
    pub slow_factor: f64,
}

impl Default for MonitorPolicy {
    fn default() -> Self {
        Self {
            thresholds: WarningThresholds::default(),
            slow_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Collided,
    OutOfBounds,
    Handover,
    /// The controller returned an error.
    ControllerFailure,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Collided => "collided",
            Outcome::OutOfBounds => "out_of_bounds",
            Outcome::Handover => "handover",
            Outcome::ControllerFailure => "controller_failure",
        }
    }

    /// No state outside the safe set was visited.
    pub fn is_safe(&self) -> bool {
        matches!(self, Outcome::Completed | Outcome::Handover)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub step: usize,
    pub state: VehicleState,
    /// Controller output before actuation noise.
    pub command: f64,
    /// Steering actually applied.
    pub steering: f64,
    pub speed_cmd: f64,
    /// Present only when a monitor is active; `warning` is the monitor's verdict.
    pub report: Option<ConfidenceReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePath {
    /// One record per control step, then the terminal state (same command fields
    /// as the last control step, no report).
    pub records: Vec<EpisodeRecord>,
    pub outcome: Outcome,
    pub failure: Option<String>,
    /// Frames seen by the controller, when recorded.
    pub observations: Vec<Observation>,
}

impl EpisodePath {
    pub fn warning_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for r in self.records.iter().filter_map(|r| r.report) {
            counts[r.warning as usize] += 1;
        }
        counts
    }
}

/// Seed of episode `index` under `master`.
pub fn episode_seed(master: u64, index: u64) -> u64 {
    rng::stream(master, index).next_u64()
}

pub fn run_episode(
    scenario: &ScenarioConfig,
    controller: &dyn Controller,
    monitor: Option<&MonitorPolicy>,
    seed: u64,
) -> Result<EpisodePath> {
    simulate(scenario, controller, monitor, seed, false)
}

/// Like [`run_episode`], also keeping every frame handed to the controller.
pub fn run_episode_recording(
    scenario: &ScenarioConfig,
    controller: &dyn Controller,
    monitor: Option<&MonitorPolicy>,
    seed: u64,
) -> Result<EpisodePath> {
    simulate(scenario, controller, monitor, seed, true)
}

fn simulate(
    scenario: &ScenarioConfig,
    controller: &dyn Controller,
    monitor: Option<&MonitorPolicy>,
    seed: u64,
    record_frames: bool,
) -> Result<EpisodePath> {
    scenario.validate()?;
    let mut disturbance = rng::stream(seed, 0);
    let mut weather = rng::stream(seed, 1);
    let mut control_rng = rng::stream(seed, 2);
    let weather_model = scenario.weather.model();
    let d = &scenario.disturbance;

    let mut state = scenario.start;
    let jitter: f64 = disturbance.sample::<f64, _>(StandardNormal) * d.lateral_jitter_sd;
    state.x -= jitter * state.heading.sin();
    state.y += jitter * state.heading.cos();

    let mut records = Vec::with_capacity(scenario.horizon + 1);
    let mut observations = Vec::new();
    let mut failure = None;
    let mut braking = false;
    let mut last = (0.0, 0.0, scenario.nominal_speed);
    let mut outcome = match safety_status(&state, scenario) {
        SafetyStatus::Collision => Some(Outcome::Collided),
        SafetyStatus::OutOfBounds => Some(Outcome::OutOfBounds),
        SafetyStatus::Safe => None,
    };

    let mut k = 0;
    while outcome.is_none() && k < scenario.horizon {
        if scenario.centerline.project(state.position()).s >= scenario.goal_progress {
            outcome = Some(Outcome::Completed);
            break;
        }
        let obs = (record_frames || controller.needs_observation())
            .then(|| apply_weather(&render(&state, scenario), &weather_model, &mut weather));
        let noise: f64 = disturbance.sample::<f64, _>(StandardNormal) * d.steering_noise_sd;
        let out = match controller.control(obs.as_ref(), &state, scenario, &mut control_rng) {
            Ok(out) => out,
            Err(e) => {
                failure = Some(e);
                outcome = Some(Outcome::ControllerFailure);
                break;
            }
        };
        if record_frames {
            observations.extend(obs);
        }
        let steering = (out.steering + noise).clamp(-1.0, 1.0);
        let mut speed_cmd = scenario.nominal_speed;
        let report = monitor.and_then(|m| {
            let mut r = out.report?;
            r.warning = m.thresholds.classify(r.eta2, r.mutual_info);
            match r.warning {
                Warning::W2 => braking = true,
                Warning::W0 | Warning::W1 => speed_cmd = m.slow_factor * scenario.nominal_speed,
                Warning::None => {}
            }
            Some(r)
        });
        if braking {
            speed_cmd = 0.0;
        }
        records.push(EpisodeRecord {
            step: k,
            state,
            command: out.steering,
            steering,
            speed_cmd,
            report,
        });
        last = (out.steering, steering, speed_cmd);
        state = step(&state, steering, speed_cmd, scenario.dt, &scenario.vehicle);
        k += 1;
        outcome = match safety_status(&state, scenario) {
            SafetyStatus::Collision => Some(Outcome::Collided),
            SafetyStatus::OutOfBounds => Some(Outcome::OutOfBounds),
            SafetyStatus::Safe if braking && state.speed == 0.0 => Some(Outcome::Handover),
            SafetyStatus::Safe => None,
        };
    }
    records.push(EpisodeRecord {
        step: k,
        state,
        command: last.0,
        steering: last.1,
        speed_cmd: last.2,
        report: None,
    });
    Ok(EpisodePath {
        records,
        outcome: outcome.unwrap_or(Outcome::Completed),
        failure,
        observations,
    })
}

/// An autopilot-labelled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledFrame {
    pub observation: Observation,
    pub steering: f64,
    pub class: usize,
    pub episode: usize,
    pub episode_seed: u64,
}

/// Autopilot episodes with jittered starts; every frame is labelled with the
/// autopilot's steering command. Fails if any generating episode leaves the safe set.
pub fn collect_dataset(scenario: &ScenarioConfig, episodes: usize, seed: u64, bins: &Binning) -> Result<Vec<LabelledFrame>> {
    if episodes == 0 {
        return Err(SimError::InvalidScenario("at least one episode".into()));
    }
    let mut frames = Vec::new();
    for ep in 0..episodes {
        let s = episode_seed(seed, ep as u64);
        let path = run_episode_recording(scenario, &Autopilot, None, s)?;
        if !path.outcome.is_safe() {
            return Err(SimError::UnsafeCollection { episode: ep, outcome: path.outcome });
        }
        for (obs, rec) in path.observations.into_iter().zip(&path.records) {
            frames.push(LabelledFrame {
                observation: obs,
                steering: rec.command,
                class: bins.steering_to_class(rec.command),
                episode: ep,
                episode_seed: s,
            });
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::Disturbance;

    #[test]
    fn autopilot_on_centerline_is_straight() {
        let s = ScenarioConfig::straight_obstacle();
        assert!(autopilot(&s.start, &s).abs() < 1e-9);
    }

    #[test]
    fn autopilot_corrects_offsets() {
        let s = ScenarioConfig::straight_obstacle();
        let left = VehicleState { y: 0.5, ..s.start };
        let right = VehicleState { y: -0.5, ..s.start };
        assert!(autopilot(&left, &s) < 0.0);
        assert!(autopilot(&right, &s) > 0.0);
    }

    #[test]
    fn corridor_boundary() {
        let s = ScenarioConfig::roundabout_first_exit();
        assert!(is_safe(&s.start, &s));
        let out = VehicleState { y: s.corridor_half_width + 0.01, ..s.start };
        assert_eq!(safety_status(&out, &s), SafetyStatus::OutOfBounds);
    }

    #[test]
    fn one_episode_bounds_the_frame_count() {
        let s = ScenarioConfig::roundabout_first_exit().with_disturbance(Disturbance::none());
        let frames = collect_dataset(&s, 1, 3, &Binning::default()).unwrap();
        assert!(!frames.is_empty() && frames.len() <= s.horizon + 1);
    }
}
