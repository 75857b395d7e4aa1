use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dynamics::{VehicleParams, VehicleState};
use super::geometry::{Path, Rect, Rigid, Segment};
use super::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    StraightObstacle,
    RoundaboutFirstExit,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::StraightObstacle => "straight_obstacle",
            MapKind::RoundaboutFirstExit => "roundabout_first_exit",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight_obstacle" => Ok(MapKind::StraightObstacle),
            "roundabout_first_exit" => Ok(MapKind::RoundaboutFirstExit),
            _ => Err(SimError::InvalidScenario(format!("unknown map '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    Cloudy,
    Wet,
    Rain,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Clear, Weather::Cloudy, Weather::Wet, Weather::Rain];

    pub fn name(&self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Cloudy => "cloudy",
            Weather::Wet => "wet",
            Weather::Rain => "rain",
        }
    }

    pub fn model(&self) -> WeatherModel {
        let base = WeatherModel::default();
        match self {
            Weather::Clear => base,
            Weather::Cloudy => WeatherModel {
                offset: -25.0,
                gain: 0.9,
                ..base
            },
            Weather::Wet => WeatherModel {
                offset: 10.0,
                gain: 1.1,
                droplet_rate: 4.0,
                ..base
            },
            Weather::Rain => WeatherModel {
                offset: -10.0,
                gain: 0.85,
                noise_sd: 12.0,
                droplet_rate: 20.0,
            },
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Weather {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Weather::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| SimError::InvalidScenario(format!("unknown weather '{s}'")))
    }
}

/// Photometric corruption of a rendered frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherModel {
    /// Added after the contrast change (intensity units).
    pub offset: f64,
    /// Contrast gain about mid-gray.
    pub gain: f64,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sd: f64,
    /// Mean number of droplets per frame (Poisson).
    pub droplet_rate: f64,
}

impl Default for WeatherModel {
    fn default() -> Self {
        Self {
            offset: 0.0,
            gain: 1.0,
            noise_sd: 0.0,
            droplet_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    /// Standard deviation of the initial lateral offset (m).
    pub lateral_jitter_sd: f64,
    /// Standard deviation of the noise added to every steering command.
    pub steering_noise_sd: f64,
}

impl Default for Disturbance {
    fn default() -> Self {
        Self {
            lateral_jitter_sd: 0.3,
            steering_noise_sd: 0.02,
        }
    }
}

impl Disturbance {
    pub fn none() -> Self {
        Self {
            lateral_jitter_sd: 0.0,
            steering_noise_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub map: MapKind,
    pub centerline: Path,
    /// Lateral bound of the safe set around the centerline (m).
    pub corridor_half_width: f64,
    pub obstacle: Option<Rect>,
    pub start: VehicleState,
    /// Arc length along the centerline at which the episode is complete.
    pub goal_progress: f64,
    pub nominal_speed: f64,
    /// Maximum number of control steps.
    pub horizon: usize,
    pub dt: f64,
    pub weather: Weather,
    pub disturbance: Disturbance,
    pub vehicle: VehicleParams,
}

/// Gap between the front bumper and the obstacle in the obstacle scenario (m).
pub const OBSTACLE_GAP: f64 = 40.0;

impl ScenarioConfig {
    pub fn preset(map: MapKind) -> Self {
        match map {
            MapKind::StraightObstacle => Self::straight_obstacle(),
            MapKind::RoundaboutFirstExit => Self::roundabout_first_exit(),
        }
    }

    /// A straight road whose lane bends left around an obstacle standing in the
    /// right half, 40 m ahead of the car.
    pub fn straight_obstacle() -> Self {
        let vehicle = VehicleParams::default();
        let centerline = Path::polyline(&[
            (-20.0, 0.0),
            (20.0, 0.0),
            (34.0, 1.4),
            (54.0, 1.4),
            (66.0, 0.0),
            (200.0, 0.0),
        ])
        .unwrap();
        let half_depth = 2.0;
        let obstacle = Rect {
            center: (vehicle.length / 2.0 + OBSTACLE_GAP + half_depth, -1.1),
            heading: 0.0,
            half_length: half_depth,
            half_width: 1.0,
        };
        let goal_progress = centerline.project((80.0, 0.0)).s;
        Self {
            map: MapKind::StraightObstacle,
            centerline,
            corridor_half_width: 1.5,
            obstacle: Some(obstacle),
            start: VehicleState {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
                speed: 8.0,
            },
            goal_progress,
            nominal_speed: 8.0,
            horizon: 300,
            dt: 0.05,
            weather: Weather::Clear,
            disturbance: Disturbance::default(),
            vehicle,
        }
    }

    /// 10 m approach, a right-hand quarter circle of radius 18 m, 20 m of exit road.
    pub fn roundabout_first_exit() -> Self {
        let radius = 18.0;
        let centerline = Path::new(vec![
            Segment::Line {
                start: (-20.0, 0.0),
                end: (0.0, 0.0),
            },
            Segment::Arc {
                center: (0.0, -radius),
                radius,
                start_angle: PI / 2.0,
                sweep: -PI / 2.0,
            },
            Segment::Line {
                start: (radius, -radius),
                end: (radius, -radius - 60.0),
            },
        ])
        .unwrap();
        let goal_progress = 20.0 + radius * PI / 2.0 + 20.0;
        Self {
            map: MapKind::RoundaboutFirstExit,
            centerline,
            corridor_half_width: 1.5,
            obstacle: None,
            start: VehicleState {
                x: -10.0,
                y: 0.0,
                heading: 0.0,
                speed: 8.0,
            },
            goal_progress,
            nominal_speed: 8.0,
            horizon: 300,
            dt: 0.05,
            weather: Weather::Clear,
            disturbance: Disturbance::default(),
            vehicle: VehicleParams::default(),
        }
    }

    pub fn with_weather(mut self, weather: Weather) -> Self {
        self.weather = weather;
        self
    }

    pub fn with_disturbance(mut self, disturbance: Disturbance) -> Self {
        self.disturbance = disturbance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.into()));
        if !(self.corridor_half_width > 0.0) {
            return bad("corridor half-width must be positive");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least one step");
        }
        if !(self.nominal_speed >= 0.0) {
            return bad("nominal speed must be non-negative");
        }
        let d = &self.disturbance;
        if !(d.lateral_jitter_sd >= 0.0) || !(d.steering_noise_sd >= 0.0) {
            return bad("disturbance deviations must be non-negative");
        }
        Ok(())
    }

    /// The same scene moved by a rigid motion.
    pub fn transformed(&self, m: &Rigid) -> Self {
        let (x, y) = m.apply(self.start.position());
        Self {
            centerline: self.centerline.transformed(m),
            obstacle: self.obstacle.map(|o| o.transformed(m)),
            start: VehicleState {
                x,
                y,
                heading: super::geometry::wrap_angle(self.start.heading + m.rotation),
                ..self.start
            },
            ..self.clone()
        }
    }
}
