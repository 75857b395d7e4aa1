use rand::Rng;

use super::{NetworkSpec, NnError, Result};

/// Keep/drop flags for every layer with a positive dropout rate. Layers without
/// dropout carry `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropoutMask {
    layers: Vec<Option<Vec<bool>>>,
}

impl DropoutMask {
    pub fn new(spec: &NetworkSpec, layers: Vec<Option<Vec<bool>>>) -> Result<Self> {
        let mask = Self { layers };
        mask.check(spec)?;
        Ok(mask)
    }

    /// A mask that keeps every unit.
    pub fn keep_all(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| (l.dropout_rate > 0.0).then(|| vec![true; spec.layer_input_len(i)]))
            .collect();
        Self { layers }
    }

    pub fn layer(&self, index: usize) -> Option<&[bool]> {
        self.layers.get(index).and_then(|l| l.as_deref())
    }

    pub fn layers(&self) -> &[Option<Vec<bool>>] {
        &self.layers
    }

    pub(crate) fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers().len() {
            return Err(NnError::Mask(format!(
                "{} layer entries for a {}-layer network",
                self.layers.len(),
                spec.layers().len()
            )));
        }
        for (i, (entry, layer)) in self.layers.iter().zip(spec.layers()).enumerate() {
            match (entry, layer.dropout_rate > 0.0) {
                (None, false) => {}
                (Some(bits), true) if bits.len() == spec.layer_input_len(i) => {}
                (Some(bits), true) => {
                    return Err(NnError::Mask(format!(
                        "layer {i}: {} flags for input width {}",
                        bits.len(),
                        spec.layer_input_len(i)
                    )))
                }
                (Some(_), false) => {
                    return Err(NnError::Mask(format!("layer {i} has no dropout but a mask")))
                }
                (None, true) => return Err(NnError::Mask(format!("layer {i} is missing its mask"))),
            }
        }
        Ok(())
    }
}

/// Draws each flag independently as Bernoulli(1 - rate).
pub fn sample_dropout_mask<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> DropoutMask {
    let layers = spec
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            (l.dropout_rate > 0.0).then(|| {
                let keep = 1.0 - l.dropout_rate;
                (0..spec.layer_input_len(i))
                    .map(|_| rng.random::<f64>() < keep)
                    .collect()
            })
        })
        .collect();
    DropoutMask { layers }
}
