//! Safety-evaluation summaries.

use bnn_verify::sim::{EpisodePath, MapKind, Weather};
use bnn_verify::statcheck::SafetyEstimate;
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Control steps per warning tier, summed over a cell's episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WarningCounts {
    pub none: usize,
    pub w0: usize,
    pub w1: usize,
    pub w2: usize,
}

impl WarningCounts {
    pub fn from_paths(paths: &[EpisodePath]) -> Self {
        let mut c = [0usize; 4];
        for p in paths {
            for (acc, v) in c.iter_mut().zip(p.warning_counts()) {
                *acc += v;
            }
        }
        Self {
            none: c[0],
            w0: c[1],
            w1: c[2],
            w2: c[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub scenario: MapKind,
    pub weather: Weather,
    pub monitor: bool,
    pub estimate: SafetyEstimate,
    pub autonomy_rate: f64,
    pub warnings: WarningCounts,
    /// Trajectory log of this cell, relative to the report.
    pub trajectories: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionUsed {
    pub theta: f64,
    pub gamma: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub format_version: u32,
    pub precision: PrecisionUsed,
    pub cells: Vec<Cell>,
    pub config: RunConfig,
}

impl SummaryReport {
    pub fn cell(&self, weather: Weather, monitor: bool) -> Option<&Cell> {
        self.cells.iter().find(|c| c.weather == weather && c.monitor == monitor)
    }
}
