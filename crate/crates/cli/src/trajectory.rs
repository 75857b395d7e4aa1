//! Per-step trajectory logs.

use std::io::Write;

use bnn_verify::sim::EpisodePath;

use crate::error::Result;

pub const HEADER: [&str; 12] = [
    "episode", "step", "t", "x", "y", "heading", "speed", "steering", "eta2", "mi", "warning", "outcome",
];

/// Writes one row per record; `eta2`, `mi` and `warning` stay empty for records
/// without a confidence report.
pub fn write<'a, W: Write>(out: W, episodes: impl IntoIterator<Item = (usize, &'a EpisodePath)>, dt: f64) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(HEADER)?;
    for (episode, path) in episodes {
        let outcome = path.outcome.name();
        for r in &path.records {
            let (eta2, mi, warning) = match r.report {
                Some(c) => (c.eta2.to_string(), c.mutual_info.to_string(), c.warning.as_str()),
                None => (String::new(), String::new(), ""),
            };
            csv.write_record([
                episode.to_string(),
                r.step.to_string(),
                (r.step as f64 * dt).to_string(),
                r.state.x.to_string(),
                r.state.y.to_string(),
                r.state.heading.to_string(),
                r.state.speed.to_string(),
                r.steering.to_string(),
                eta2,
                mi,
                warning.to_string(),
                outcome.to_string(),
            ])?;
        }
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_bytes<'a>(episodes: impl IntoIterator<Item = (usize, &'a EpisodePath)>, dt: f64) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write(&mut out, episodes, dt)?;
    Ok(out)
}
