use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::nn::Tensor;

use super::dynamics::VehicleState;
use super::scenario::{ScenarioConfig, WeatherModel};
use super::{Result, SimError};

pub const WIDTH: usize = 64;
pub const HEIGHT: usize = 48;

pub const ROAD: u8 = 120;
pub const MARKING: u8 = 220;
pub const OFF_ROAD: u8 = 40;
pub const OBSTACLE: u8 = 10;
pub const SKY: u8 = 170;

const CAMERA_HEIGHT: f64 = 1.2;
const PITCH: f64 = 0.12;
const HORIZONTAL_FOV: f64 = std::f64::consts::FRAC_PI_3;
const MARKING_WIDTH: f64 = 0.15;
const OBSTACLE_HEIGHT: f64 = 1.5;
const DROPLET_INTENSITY: f64 = 235.0;
const DROPLET_RADII: (f64, f64) = (2.5, 4.0);

/// A 64×48 grayscale frame, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pixels: Vec<u8>,
}

impl Observation {
    pub fn new(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != WIDTH * HEIGHT {
            return Err(SimError::Image(format!("expected {} pixels, got {}", WIDTH * HEIGHT, pixels.len())));
        }
        Ok(Self { pixels })
    }

    pub fn filled(value: u8) -> Self {
        Self {
            pixels: vec![value; WIDTH * HEIGHT],
        }
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * WIDTH + col]
    }

    /// Intensities scaled to `[0, 1]`, shape `[48, 64, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.pixels.iter().map(|&p| p as f64 / 255.0).collect();
        Tensor::new(vec![HEIGHT, WIDTH, 1], data).expect("frame shape is fixed")
    }

    /// Binary PGM (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{WIDTH} {HEIGHT}\n255\n").into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| SimError::Image(m.to_string());
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("bad header"))?);
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        if fields[0] != "P5" {
            return Err(err("not a binary PGM"));
        }
        let dims: Vec<usize> = fields[1..].iter().map(|f| f.parse().map_err(|_| err("bad number"))).collect::<Result<_>>()?;
        if dims != [WIDTH, HEIGHT, 255] {
            return Err(err(&format!("expected {WIDTH}x{HEIGHT} maxval 255, got {dims:?}")));
        }
        let raster = bytes.get(pos..).ok_or_else(|| err("missing raster"))?;
        Self::new(raster.to_vec())
    }
}

/// Ray direction through the center of a pixel in the vehicle frame
/// (x forward, y left, z up).
fn pixel_ray(row: usize, col: usize) -> (f64, f64, f64) {
    let focal = (WIDTH as f64 / 2.0) / (HORIZONTAL_FOV / 2.0).tan();
    let right = (col as f64 + 0.5 - WIDTH as f64 / 2.0) / focal;
    let up = (HEIGHT as f64 / 2.0 - (row as f64 + 0.5)) / focal;
    let (s, c) = PITCH.sin_cos();
    (c + up * s, -right, -s + up * c)
}

/// Pinhole view from the front bumper, looking along the vehicle heading.
pub fn render(state: &VehicleState, scenario: &ScenarioConfig) -> Observation {
    let (sin_h, cos_h) = state.heading.sin_cos();
    let half = scenario.vehicle.length / 2.0;
    let cam = (state.x + half * cos_h, state.y + half * sin_h);
    let hw = scenario.corridor_half_width;
    let mut pixels = Vec::with_capacity(WIDTH * HEIGHT);
    for row in 0..HEIGHT {
        for col in 0..WIDTH {
            let (fx, ly, dz) = pixel_ray(row, col);
            let dir = (cos_h * fx - sin_h * ly, sin_h * fx + cos_h * ly, dz);
            let ground = (dz < 0.0).then(|| CAMERA_HEIGHT / -dz);
            let hits_obstacle = scenario
                .obstacle
                .as_ref()
                .and_then(|o| box_hit(o, cam, dir))
                .is_some_and(|t| ground.is_none_or(|g| t < g));
            let value = if hits_obstacle {
                OBSTACLE
            } else if let Some(t) = ground {
                let lateral = scenario.centerline.project((cam.0 + t * dir.0, cam.1 + t * dir.1)).lateral.abs();
                if lateral <= hw - MARKING_WIDTH {
                    ROAD
                } else if lateral <= hw {
                    MARKING
                } else {
                    OFF_ROAD
                }
            } else {
                SKY
            };
            pixels.push(value);
        }
    }
    Observation { pixels }
}

/// Entry distance of a ray from `origin` (at camera height) into the obstacle box.
fn box_hit(o: &super::geometry::Rect, origin: (f64, f64), dir: (f64, f64, f64)) -> Option<f64> {
    let (ox, oy) = o.to_local(origin);
    let (s, c) = o.heading.sin_cos();
    let (dx, dy) = (c * dir.0 + s * dir.1, -s * dir.0 + c * dir.1);
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for (p, d, lo, hi) in [
        (ox, dx, -o.half_length, o.half_length),
        (oy, dy, -o.half_width, o.half_width),
        (CAMERA_HEIGHT, dir.2, 0.0, OBSTACLE_HEIGHT),
    ] {
        if d.abs() < 1e-15 {
            if p < lo || p > hi {
                return None;
            }
        } else {
            let (a, b) = ((lo - p) / d, (hi - p) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 <= t1).then_some(t0)
}

/// Contrast, brightness, pixel noise and droplets, clamped to `[0, 255]`.
pub fn apply_weather<R: Rng + ?Sized>(img: &Observation, w: &WeatherModel, rng: &mut R) -> Observation {
    let mut values: Vec<f64> = img
        .pixels
        .iter()
        .map(|&p| {
            let mut v = w.gain * (p as f64 - 128.0) + 128.0 + w.offset;
            if w.noise_sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                v += w.noise_sd * z;
            }
            v
        })
        .collect();
    if w.droplet_rate > 0.0 {
        let count = Poisson::new(w.droplet_rate).map(|d| d.sample(rng) as usize).unwrap_or(0);
        let (rx, ry) = DROPLET_RADII;
        for _ in 0..count {
            let cx = rng.random_range(0.0..WIDTH as f64);
            let cy = rng.random_range(0.0..HEIGHT as f64);
            let rows = (cy - ry).floor().max(0.0) as usize..=((cy + ry).ceil() as usize).min(HEIGHT - 1);
            for row in rows {
                let cols = (cx - rx).floor().max(0.0) as usize..=((cx + rx).ceil() as usize).min(WIDTH - 1);
                for col in cols {
                    let (u, v) = ((col as f64 + 0.5 - cx) / rx, (row as f64 + 0.5 - cy) / ry);
                    if u * u + v * v <= 1.0 {
                        values[row * WIDTH + col] = DROPLET_INTENSITY;
                    }
                }
            }
        }
    }
    Observation {
        pixels: values.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
    }
}
