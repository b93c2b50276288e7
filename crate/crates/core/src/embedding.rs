use serde::{Deserialize, Deserializer, Serialize};

use crate::{Error, Result};

/// Maximum allowed deviation of an embedding's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// A unit-length face embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FaceEmbedding(Vec<f64>);

impl FaceEmbedding {
    /// Wraps values that are already unit-norm.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding has no components".into()));
        }
        let norm = l2_norm(&values);
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "embedding norm {norm} is not 1 within {NORM_TOLERANCE}"
            )));
        }
        Ok(FaceEmbedding(values))
    }

    /// Scales arbitrary non-zero values onto the unit sphere.
    pub fn normalize(mut values: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&values);
        if values.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput(
                "cannot normalize an empty, zero or non-finite vector".into(),
            ));
        }
        for v in &mut values {
            *v /= norm;
        }
        Ok(FaceEmbedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &FaceEmbedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

impl<'de> Deserialize<'de> for FaceEmbedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        FaceEmbedding::new(values).map_err(serde::de::Error::custom)
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `1 - a·b`, clamped to `[0, 2]` against rounding.
pub fn cosine_distance(a: &FaceEmbedding, b: &FaceEmbedding) -> Result<f64> {
    Ok((1.0 - a.dot(b)?).clamp(0.0, 2.0))
}
