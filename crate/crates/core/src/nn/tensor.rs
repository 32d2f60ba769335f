use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel-major 1D feature map: `values[c * length + t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor1D {
    pub channels: usize,
    pub length: usize,
    pub values: Vec<f64>,
}

impl Tensor1D {
    pub fn new(channels: usize, length: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * length {
            return Err(Error::shape(format!(
                "{} values for a {channels}x{length} tensor",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite tensor entry {v}")));
        }
        Ok(Tensor1D { channels, length, values })
    }

    /// Single-channel tensor over `values`.
    pub fn row(values: &[f64]) -> Result<Self> {
        Self::new(1, values.len(), values.to_vec())
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Tensor1D {
            channels,
            length,
            values: vec![0.0; channels * length],
        }
    }

    pub(crate) fn from_parts(channels: usize, length: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), channels * length);
        Tensor1D { channels, length, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.values[channel * self.length + t]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.length..(channel + 1) * self.length]
    }
}
