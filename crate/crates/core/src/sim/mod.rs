//! A deterministic 2D driving world seen through a forward camera.
//!
//! A kinematic bicycle drives along a centerline made of lines and arcs. The safe
//! set is a corridor around the centerline minus an optional rectangular obstacle.
//! Every episode draws its disturbances, weather corruption and controller samples
//! from streams derived from a single seed.

mod camera;
mod dynamics;
mod episode;
mod geometry;
mod scenario;

pub use camera::{apply_weather, render, Observation, HEIGHT, MARKING, OBSTACLE, OFF_ROAD, ROAD, SKY, WIDTH};
pub use dynamics::{step, VehicleParams, VehicleState};
pub use episode::{
    autopilot, collect_dataset, episode_seed, footprint, is_safe, run_episode, run_episode_recording, safety_status,
    Autopilot, ControlOutput, Controller, EpisodePath, EpisodeRecord, LabelledFrame, MonitorPolicy, Outcome,
    SafetyStatus, LOOKAHEAD,
};
pub use geometry::{wrap_angle, Path, Point, Projection, Rect, Rigid, Segment};
pub use scenario::{Disturbance, MapKind, ScenarioConfig, Weather, WeatherModel, OBSTACLE_GAP};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid image: {0}")]
    Image(String),
    #[error("autopilot episode {episode} ended {outcome:?} during collection")]
    UnsafeCollection { episode: usize, outcome: Outcome },
}

pub type Result<T> = std::result::Result<T, SimError>;
