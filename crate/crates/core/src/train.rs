//! Full-batch gradient descent for L2-regularized logistic regression.
//!
//! Continuous and ordinal columns are standardized for the optimization and
//! the coefficients are mapped back to raw feature units afterwards.
//! Categorical columns are one-hot encoded.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, Label, LinearModel, Weight};
use crate::schema::{FeatureKind, FeatureSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Recorded in the model metadata. Initialization is all-zero and the
    /// optimizer is full-batch, so the fit does not consume randomness.
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 2000,
            l2: 1e-4,
            seed: 0,
            threshold: 0.5,
        }
    }
}

/// One design-matrix column: either a scaled numeric feature or one
/// category of a categorical feature.
enum Column {
    Numeric { feature: usize, mean: f64, scale: f64 },
    OneHot { feature: usize, category: usize },
}

fn design(schema: &FeatureSchema, data: &Dataset) -> Vec<Column> {
    let n = data.len() as f64;
    let mut cols = Vec::new();
    for (i, f) in schema.features().iter().enumerate() {
        match f.kind {
            FeatureKind::Categorical => {
                cols.extend((0..f.categories.len()).map(|c| Column::OneHot { feature: i, category: c }))
            }
            _ => {
                let col = data.column(i);
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                cols.push(Column::Numeric {
                    feature: i,
                    mean,
                    scale: if sd > 0.0 { sd } else { 1.0 },
                });
            }
        }
    }
    cols
}

pub fn train_logistic(schema: &FeatureSchema, data: &Dataset, config: &TrainConfig) -> Result<LinearModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Parameter("learning rate must be positive".into()));
    }
    if !(config.l2 >= 0.0) {
        return Err(Error::Parameter("l2 must be non-negative".into()));
    }
    for (r, x) in data.rows().iter().enumerate() {
        schema.validate(x).map_err(|e| Error::Row {
            row: r + 1,
            column: "*".into(),
            message: e.to_string(),
        })?;
    }

    let cols = design(schema, data);
    let matrix: Vec<Vec<f64>> = data
        .rows()
        .iter()
        .map(|x| {
            cols.iter()
                .map(|c| match *c {
                    Column::Numeric { feature, mean, scale } => (x.get(feature) - mean) / scale,
                    Column::OneHot { feature, category } => {
                        if x.get(feature) as usize == category {
                            1.0
                        } else {
                            0.0
                        }
                    }
                })
                .collect()
        })
        .collect();
    let targets: Vec<f64> = data.labels().iter().map(|&l| f64::from(l.as_u8())).collect();

    let n = data.len() as f64;
    let mut w = vec![0.0; cols.len()];
    let mut b = 0.0;
    let mut grad = vec![0.0; cols.len()];
    for _ in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &y) in matrix.iter().zip(&targets) {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let err = sigmoid(z) - y;
            for (g, a) in grad.iter_mut().zip(row) {
                *g += err * a;
            }
            grad_b += err;
        }
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= config.learning_rate * (g / n + config.l2 * *wj);
        }
        b -= config.learning_rate * grad_b / n;
    }

    // Back to raw units.
    let mut weights: Vec<Weight> = schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Categorical => Weight::Categorical(vec![0.0; f.categories.len()]),
            _ => Weight::Scalar(0.0),
        })
        .collect();
    let mut bias = b;
    for (c, &wj) in cols.iter().zip(&w) {
        match *c {
            Column::Numeric { feature, mean, scale } => {
                weights[feature] = Weight::Scalar(wj / scale);
                bias -= wj * mean / scale;
            }
            Column::OneHot { feature, category } => {
                if let Weight::Categorical(ws) = &mut weights[feature] {
                    ws[category] = wj;
                }
            }
        }
    }
    let mut meta = Map::new();
    meta.insert("trainer".into(), Value::from("full-batch gradient descent"));
    meta.insert("epochs".into(), Value::from(config.epochs));
    meta.insert("learning_rate".into(), Value::from(config.learning_rate));
    meta.insert("l2".into(), Value::from(config.l2));
    meta.insert("seed".into(), Value::from(config.seed));
    meta.insert("rows".into(), Value::from(data.len()));
    Ok(LinearModel::new(schema.clone(), weights, bias, config.threshold)?.with_metadata(meta))
}

/// Fraction of rows whose predicted label equals the recorded one.
pub fn accuracy(model: &LinearModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for (x, &y) in data.rows().iter().zip(data.labels()) {
        if model.classify(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Predicted labels, for callers that only need the decision.
pub fn predict_all(model: &LinearModel, data: &Dataset) -> Result<Vec<Label>> {
    data.rows().iter().map(|x| model.classify(x)).collect()
}
