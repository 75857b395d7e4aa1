//! Dataset directories: `NNNNNN.pgm` frames plus `labels.csv`.

use std::path::{Path, PathBuf};

use bnn_verify::bayes::ImageDataset;
use bnn_verify::sim::{LabelledFrame, MapKind, Observation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const LABELS: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub index: usize,
    pub class: usize,
    pub steering: f64,
    pub scenario: MapKind,
    /// Seed of the episode that produced the frame.
    pub seed: u64,
}

pub fn image_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index:06}.pgm"))
}

pub fn write(dir: &Path, frames: &[LabelledFrame], map: MapKind) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let labels = dir.join(LABELS);
    let mut csv = csv::Writer::from_path(&labels)?;
    for (index, f) in frames.iter().enumerate() {
        let path = image_path(dir, index);
        std::fs::write(&path, f.observation.to_pgm()).map_err(|e| CliError::io(&path, e))?;
        csv.serialize(LabelRow {
            index,
            class: f.class,
            steering: f.steering,
            scenario: map,
            seed: f.episode_seed,
        })?;
    }
    csv.flush().map_err(|e| CliError::io(&labels, e))?;
    Ok(())
}

/// A dataset read back from disk together with its content hash.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub rows: Vec<LabelRow>,
    pub images: Vec<Observation>,
    /// SHA-256 over `labels.csv` followed by every referenced image, in row order.
    pub hash: String,
}

impl LoadedDataset {
    pub fn to_image_dataset(&self) -> ImageDataset {
        let mut data = ImageDataset::default();
        for (row, img) in self.rows.iter().zip(&self.images) {
            data.push(img.to_tensor(), row.class);
        }
        data
    }
}

pub fn read(dir: &Path, classes: usize) -> Result<LoadedDataset> {
    let labels = dir.join(LABELS);
    let csv_bytes = std::fs::read(&labels).map_err(|e| CliError::io(&labels, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&csv_bytes);
    let mut rows = Vec::new();
    let mut images = Vec::new();
    for row in csv::Reader::from_reader(csv_bytes.as_slice()).deserialize() {
        let row: LabelRow = row?;
        if row.class >= classes {
            return Err(CliError::Runtime(format!(
                "{}: row {} has class {} outside [0, {classes})",
                labels.display(),
                row.index,
                row.class
            )));
        }
        let path = image_path(dir, row.index);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        hasher.update(&bytes);
        images.push(Observation::from_pgm(&bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Runtime(format!("{}: no labelled frames", labels.display())));
    }
    Ok(LoadedDataset {
        rows,
        images,
        hash: hex::encode(hasher.finalize()),
    })
}
