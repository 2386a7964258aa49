//! Inverse median-absolute-deviation feature weights.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSchema};

/// Per-feature distance weights. A feature whose MAD is zero is excluded:
/// it contributes nothing to the distance and is never perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadWeights {
    weights: Vec<f64>,
    excluded: Vec<bool>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `median(|v - median(v)|)` of a nonempty column.
pub fn mad(column: &[f64]) -> f64 {
    let mut v = column.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = column.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

impl MadWeights {
    pub fn new(weights: Vec<f64>, excluded: Vec<bool>) -> Result<Self> {
        if weights.len() != excluded.len() {
            return Err(Error::Parameter("weights and exclusion flags differ in length".into()));
        }
        for (w, &ex) in weights.iter().zip(&excluded) {
            if !ex && !(w.is_finite() && *w > 0.0) {
                return Err(Error::Parameter(format!("non-excluded weight {w} must be finite and > 0")));
            }
        }
        Ok(MadWeights { weights, excluded })
    }

    /// All features weighted 1.
    pub fn uniform(n: usize) -> Self {
        MadWeights {
            weights: vec![1.0; n],
            excluded: vec![false; n],
        }
    }

    /// Computes weights from a reference dataset. Categorical features get
    /// weight 1 on a mismatch indicator.
    pub fn from_dataset(schema: &FeatureSchema, data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut weights = Vec::with_capacity(schema.len());
        let mut excluded = Vec::with_capacity(schema.len());
        for (i, f) in schema.features().iter().enumerate() {
            if f.kind == FeatureKind::Categorical {
                weights.push(1.0);
                excluded.push(false);
                continue;
            }
            let m = mad(&data.column(i));
            if m > 0.0 {
                weights.push(1.0 / m);
                excluded.push(false);
            } else {
                weights.push(0.0);
                excluded.push(true);
            }
        }
        Ok(MadWeights { weights, excluded })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        if self.excluded[i] {
            0.0
        } else {
            self.weights[i]
        }
    }

    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
