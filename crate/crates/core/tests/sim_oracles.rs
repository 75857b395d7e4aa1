use std::f64::consts::PI;

use bnn_verify::rng::{seeded, Rng};
use bnn_verify::sim::{
    apply_weather, autopilot, collect_dataset, episode_seed, footprint, is_safe, render, run_episode,
    run_episode_recording, step, Autopilot, ControlOutput, Controller, Disturbance, MapKind, MonitorPolicy,
    Observation, Outcome, Path, Rect, Rigid, ScenarioConfig, VehicleParams, VehicleState, WeatherModel, OBSTACLE,
};
use bnn_verify::uncertainty::{Binning, ConfidenceReport, Warning, WarningThresholds};
use rand::Rng as _;

/// Fixed steering with a fixed self-reported confidence.
struct Constant {
    steering: f64,
    eta2: f64,
}

impl Controller for Constant {
    fn needs_observation(&self) -> bool {
        false
    }

    fn control(&self, _: Option<&Observation>, _: &VehicleState, _: &ScenarioConfig, _: &mut Rng) -> Result<ControlOutput, String> {
        Ok(ControlOutput {
            steering: self.steering,
            report: Some(ConfidenceReport {
                eta2: self.eta2,
                mutual_info: 0.0,
                warning: Warning::None,
                n_samples: 1,
            }),
        })
    }
}

#[test]
fn zero_steering_hits_the_obstacle_after_five_seconds() {
    let s = ScenarioConfig::straight_obstacle().with_disturbance(Disturbance::none());
    let path = run_episode(&s, &Constant { steering: 0.0, eta2: 1.0 }, None, 1).unwrap();
    assert_eq!(path.outcome, Outcome::Collided);
    let t = path.records.last().unwrap().step as f64 * s.dt;
    assert!((t - 5.0).abs() <= s.dt + 1e-9, "collision at t = {t}");
    // Every state before the collision was safe.
    assert!(path.records[..path.records.len() - 1].iter().all(|r| is_safe(&r.state, &s)));
}

fn drive(steering: &dyn Fn(f64) -> f64, speed: f64, duration: f64, dt: f64) -> VehicleState {
    let p = VehicleParams::default();
    let mut s = VehicleState { x: 0.0, y: 0.0, heading: 0.0, speed };
    let n = (duration / dt).round() as usize;
    for k in 0..n {
        s = step(&s, steering(k as f64 * dt), speed, dt, &p);
    }
    s
}

#[test]
fn circular_motion_matches_closed_form() {
    let p = VehicleParams::default();
    let (steer, v) = (0.4, 6.0);
    let kappa = (steer * p.max_steer).tan() / p.wheelbase;
    let period = 2.0 * PI / (kappa * v);
    let radius = 1.0 / kappa;
    for n in [400.0, 800.0, 1600.0] {
        let s = drive(&|_| steer, v, period, period / n);
        assert!(s.x.hypot(s.y) <= v * period / n, "closure miss {}", s.x.hypot(s.y));
    }
    // Half way round the exact circle sits at (0, 2R); Euler lags by O(dt).
    let errors: Vec<f64> = [400.0, 800.0, 1600.0]
        .iter()
        .map(|n| {
            let s = drive(&|_| steer, v, period / 2.0, period / n);
            s.x.hypot(s.y - 2.0 * radius)
        })
        .collect();
    assert!(errors[0] < 1.0, "{errors:?}");
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..2.5).contains(&ratio), "ratios off: {errors:?}");
    }
}

#[test]
fn halving_dt_converges_at_first_order() {
    let schedules: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|t| 0.3 * (t * 0.8).sin()),
        Box::new(|t| if t < 2.0 { 0.2 } else { -0.25 }),
        Box::new(|t| 0.5 - 0.1 * t),
    ];
    for sched in &schedules {
        let end = |dt: f64| drive(sched.as_ref(), 8.0, 4.0, dt);
        let (a, b, c) = (end(0.02), end(0.01), end(0.005));
        let d1 = (a.x - b.x).hypot(a.y - b.y);
        let d2 = (b.x - c.x).hypot(b.y - c.y);
        let ratio = d1 / d2;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }
}

/// Points along the outline of a rectangle, spaced at most `h` apart.
fn outline(r: &Rect, h: f64) -> Vec<(f64, f64)> {
    let c = r.corners();
    let mut pts = Vec::new();
    for i in 0..4 {
        let (a, b) = (c[i], c[(i + 1) % 4]);
        let n = ((a.0 - b.0).hypot(a.1 - b.1) / h).ceil() as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            pts.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    pts
}

/// Two convex outlines overlap iff a sampled boundary point of one lies in the
/// other (up to the sampling resolution).
fn sampled_overlap(a: &Rect, b: &Rect) -> bool {
    outline(a, 1e-3).iter().any(|&p| b.contains(p)) || outline(b, 1e-3).iter().any(|&p| a.contains(p))
}

#[test]
fn is_safe_agrees_with_point_sampling() {
    let s = ScenarioConfig::straight_obstacle();
    let o = s.obstacle.unwrap();
    let mut rng = seeded(21);
    let mut collisions = 0;
    for _ in 0..1000 {
        let st = VehicleState {
            x: o.center.0 + rng.random_range(-6.0..6.0),
            y: o.center.1 + rng.random_range(-2.5..3.5),
            heading: rng.random_range(-PI..PI),
            speed: 8.0,
        };
        let overlap = sampled_overlap(&footprint(&st, &s), &o);
        let lateral_ok = s.centerline.project(st.position()).lateral.abs() <= s.corridor_half_width;
        collisions += usize::from(overlap);
        assert_eq!(is_safe(&st, &s), !overlap && lateral_ok, "{st:?}");
    }
    assert!(collisions > 100 && collisions < 900, "{collisions} collisions");
}

#[test]
fn autopilot_is_always_safe() {
    for map in [MapKind::StraightObstacle, MapKind::RoundaboutFirstExit] {
        let s = ScenarioConfig::preset(map);
        for ep in 0..100 {
            let path = run_episode(&s, &Autopilot, None, episode_seed(99, ep)).unwrap();
            assert_eq!(path.outcome, Outcome::Completed, "{map} episode {ep}");
        }
    }
}

#[test]
fn forced_brake_hands_over_without_collision() {
    let s = ScenarioConfig::straight_obstacle();
    let monitor = MonitorPolicy {
        thresholds: WarningThresholds::new(1.1, 1.0, 0.45).unwrap(),
        ..MonitorPolicy::default()
    };
    for seed in 0..20 {
        let path = run_episode(&s, &Constant { steering: 0.0, eta2: 0.9 }, Some(&monitor), seed).unwrap();
        assert_eq!(path.outcome, Outcome::Handover);
        assert_eq!(path.records[0].speed_cmd, 0.0);
        assert_eq!(path.records[0].report.unwrap().warning, Warning::W2);
        let last = path.records.last().unwrap();
        assert_eq!(last.state.speed, 0.0);
        // 8 m/s at 4 m/s² stops within 40 steps.
        assert_eq!(last.step, 40);
    }
}

#[test]
fn slow_down_on_standard_warning() {
    let s = ScenarioConfig::roundabout_first_exit();
    let path = run_episode(&s, &Constant { steering: 0.0, eta2: 0.65 }, Some(&MonitorPolicy::default()), 2).unwrap();
    let r = path.records[0];
    assert_eq!(r.report.unwrap().warning, Warning::W1);
    assert_eq!(r.speed_cmd, 4.0);
}

#[test]
fn unmonitored_records_carry_no_report() {
    let s = ScenarioConfig::roundabout_first_exit();
    let path = run_episode(&s, &Constant { steering: 0.0, eta2: 0.1 }, None, 2).unwrap();
    assert!(path.records.iter().all(|r| r.report.is_none()));
    assert_ne!(path.outcome, Outcome::Handover);
}

#[test]
fn episodes_are_bit_identical() {
    for map in [MapKind::StraightObstacle, MapKind::RoundaboutFirstExit] {
        let s = ScenarioConfig::preset(map).with_weather(bnn_verify::sim::Weather::Rain);
        let a = run_episode_recording(&s, &Autopilot, None, 5).unwrap();
        let b = run_episode_recording(&s, &Autopilot, None, 5).unwrap();
        assert_eq!(a, b);
        assert!(!a.observations.is_empty());
        let c = run_episode_recording(&s, &Autopilot, None, 6).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn record_count_is_bounded() {
    let mut s = ScenarioConfig::straight_obstacle();
    s.horizon = 30;
    let path = run_episode(&s, &Autopilot, None, 0).unwrap();
    assert_eq!(path.records.len(), 31);
    assert_eq!(path.outcome, Outcome::Completed);
}

fn straight_road() -> ScenarioConfig {
    let mut s = ScenarioConfig::roundabout_first_exit().with_disturbance(Disturbance::none());
    s.centerline = Path::polyline(&[(-20.0, 0.0), (200.0, 0.0)]).unwrap();
    s.goal_progress = 100.0;
    s
}

#[test]
fn centered_straight_view_is_symmetric() {
    let s = straight_road();
    let img = render(&s.start, &s);
    for row in 0..48 {
        for col in 0..32 {
            let (a, b) = (img.get(row, col) as i32, img.get(row, 63 - col) as i32);
            assert!((a - b).abs() <= 1, "row {row} col {col}: {a} vs {b}");
        }
    }
    assert!(!img.pixels().contains(&OBSTACLE));
}

#[test]
fn obstacle_is_visible_only_when_present() {
    let s = ScenarioConfig::straight_obstacle();
    assert!(render(&s.start, &s).pixels().contains(&OBSTACLE));
    let mut clear = s.clone();
    clear.obstacle = None;
    assert!(!render(&s.start, &clear).pixels().contains(&OBSTACLE));
}

#[test]
fn rendering_depends_only_on_relative_pose() {
    let s = ScenarioConfig::straight_obstacle();
    let mut rng = seeded(8);
    for _ in 0..10 {
        let m = Rigid {
            rotation: rng.random_range(-PI..PI),
            translation: (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)),
        };
        let moved = s.transformed(&m);
        let state = VehicleState {
            x: rng.random_range(0.0..30.0),
            y: rng.random_range(-1.0..1.0),
            heading: rng.random_range(-0.2..0.2),
            speed: 8.0,
        };
        let (x, y) = m.apply(state.position());
        let moved_state = VehicleState {
            x,
            y,
            heading: state.heading + m.rotation,
            ..state
        };
        let (a, b) = (render(&state, &s), render(&moved_state, &moved));
        // Rounding can flip pixels lying exactly on a boundary.
        let differing = a.pixels().iter().zip(b.pixels()).filter(|(p, q)| p != q).count();
        assert!(differing <= 3, "{differing} pixels differ");
    }
}

#[test]
fn pixel_noise_is_half_normal() {
    let img = Observation::filled(128);
    let w = WeatherModel {
        noise_sd: 12.0,
        ..WeatherModel::default()
    };
    let mut rng = seeded(3);
    let deltas: Vec<f64> = (0..4)
        .flat_map(|_| apply_weather(&img, &w, &mut rng).pixels().to_vec())
        .map(|p| (p as f64 - 128.0).abs())
        .collect();
    assert!(deltas.len() >= 10_000);
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let expected = 12.0 * (2.0 / PI).sqrt();
    assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
}

#[test]
fn collection_labels() {
    let bins = Binning::default();
    let s = ScenarioConfig::straight_obstacle();
    let frames = collect_dataset(&s, 3, 4, &bins).unwrap();
    assert!(frames.iter().all(|f| f.class < 20));
    assert_eq!(frames, collect_dataset(&s, 3, 4, &bins).unwrap());
    let straight = collect_dataset(&straight_road(), 1, 4, &bins).unwrap();
    assert!(straight.len() <= straight_road().horizon + 1);
    assert!(straight.iter().all(|f| f.class == bins.steering_to_class(0.0)));
}

#[test]
fn autopilot_is_pure() {
    let s = ScenarioConfig::roundabout_first_exit();
    let st = VehicleState { x: 3.0, y: -0.4, heading: -0.3, speed: 8.0 };
    assert_eq!(autopilot(&st, &s), autopilot(&st, &s));
}
