use serde::{Deserialize, Serialize};

use super::geometry::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-π, π]`, zero along +x, counter-clockwise positive.
    pub heading: f64,
    /// Non-negative, m/s.
    pub speed: f64,
}

impl VehicleState {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    /// Front-wheel angle at full steering command (rad).
    pub max_steer: f64,
    /// Bound on |dv/dt| (m/s²).
    pub max_accel: f64,
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleParams {
    // 30° as the rounded figure 0.5236, not π/6.
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            max_steer: 0.5236,
            max_accel: 4.0,
            length: 4.0,
            width: 1.8,
        }
    }
}

/// One explicit Euler step of the kinematic bicycle. `steering` in `[-1, 1]` is
/// scaled by the steering limit; positive steering turns left.
pub fn step(s: &VehicleState, steering: f64, speed_cmd: f64, dt: f64, p: &VehicleParams) -> VehicleState {
    let delta = steering.clamp(-1.0, 1.0) * p.max_steer;
    let (sin_h, cos_h) = s.heading.sin_cos();
    let dv_max = p.max_accel * dt;
    let target = speed_cmd.max(0.0);
    let gap = target - s.speed;
    let speed = if gap.abs() <= dv_max + 1e-9 {
        target
    } else {
        s.speed + dv_max.copysign(gap)
    };
    VehicleState {
        x: s.x + s.speed * cos_h * dt,
        y: s.y + s.speed * sin_h * dt,
        heading: wrap_angle(s.heading + s.speed / p.wheelbase * delta.tan() * dt),
        speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_rest(speed: f64) -> VehicleState {
        VehicleState { x: 0.0, y: 0.0, heading: 0.0, speed }
    }

    #[test]
    fn straight_line() {
        let s = step(&at_rest(8.0), 0.0, 8.0, 0.05, &VehicleParams::default());
        assert!((s.x - 0.4).abs() < 1e-15);
        assert_eq!((s.y, s.heading, s.speed), (0.0, 0.0, 8.0));
    }

    #[test]
    fn braking_takes_two_seconds() {
        let p = VehicleParams::default();
        let mut s = at_rest(8.0);
        let mut steps = 0;
        while s.speed > 0.0 {
            s = step(&s, 0.0, 0.0, 0.05, &p);
            steps += 1;
        }
        assert_eq!(steps, 40);
    }

    #[test]
    fn positive_steering_turns_left() {
        let s = step(&at_rest(5.0), 0.5, 5.0, 0.1, &VehicleParams::default());
        assert!(s.heading > 0.0);
    }
}
