use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Clause, FeatureKind, FeatureSchema};

/// Number of intervals used for continuous features without a declared step.
pub const DEFAULT_INTERVALS: f64 = 100.0;

/// Candidate values per feature. Features with `None` are not searched.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    values: Vec<Option<Vec<f64>>>,
}

/// Evenly spaced values `lo, lo+step, ...` not exceeding `hi`.
pub fn stepped(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).filter(|v| *v <= hi).collect()
}

impl SearchGrid {
    pub fn new(schema: &FeatureSchema, values: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::Parameter(format!(
                "grid has {} entries for {} features",
                values.len(),
                schema.len()
            )));
        }
        let mut values = values;
        for (f, vals) in schema.features().iter().zip(values.iter_mut()) {
            if let Some(vals) = vals {
                if let Some(bad) = vals.iter().find(|v| !f.in_domain(**v)) {
                    return Err(Error::Parameter(format!(
                        "grid value {bad} outside the domain of `{}`",
                        f.name
                    )));
                }
                vals.sort_by(|a, b| a.total_cmp(b));
                vals.dedup();
            }
        }
        Ok(SearchGrid { values })
    }

    /// Grid over every feature's full domain using schema-declared steps.
    pub fn from_schema(schema: &FeatureSchema) -> Self {
        let values = schema
            .features()
            .iter()
            .map(|f| {
                Some(match f.kind {
                    FeatureKind::Continuous => {
                        let step = f.step.unwrap_or((f.hi() - f.lo()) / DEFAULT_INTERVALS);
                        if step > 0.0 {
                            stepped(f.lo(), f.hi(), step)
                        } else {
                            vec![f.lo()]
                        }
                    }
                    FeatureKind::Ordinal => f.values.clone(),
                    FeatureKind::Categorical => (0..f.categories.len()).map(|c| c as f64).collect(),
                })
            })
            .collect();
        SearchGrid { values }
    }

    /// Replaces a continuous feature's grid with a new step.
    pub fn with_step(mut self, schema: &FeatureSchema, feature: &str, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Parameter(format!("grid step for `{feature}` must be > 0")));
        }
        let i = schema.index_of(feature)?;
        let f = schema.feature(i);
        if f.kind != FeatureKind::Continuous {
            return Err(Error::Parameter(format!("`{feature}` is not continuous")));
        }
        self.values[i] = Some(stepped(f.lo(), f.hi(), step));
        Ok(self)
    }

    /// Keeps only the named features searchable.
    pub fn restricted_to(mut self, schema: &FeatureSchema, features: &[String]) -> Result<Self> {
        let keep = features
            .iter()
            .map(|n| schema.index_of(n))
            .collect::<Result<Vec<_>>>()?;
        for (i, v) in self.values.iter_mut().enumerate() {
            if !keep.contains(&i) {
                *v = None;
            }
        }
        Ok(self)
    }

    pub fn values(&self, i: usize) -> Option<&[f64]> {
        self.values.get(i).and_then(|v| v.as_deref())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|v| v.as_ref().is_none_or(|v| v.is_empty()))
    }
}

/// Allowed changes for one feature in a flipset search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGridEntry {
    pub feature: String,
    pub deltas: Vec<f64>,
    /// Cost per unit of absolute change.
    pub unit_cost: f64,
    /// The entry applies only to instances satisfying every clause.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub condition: Vec<Clause>,
}

/// Action-grid file: a JSON array of entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionGrid {
    pub entries: Vec<ActionGridEntry>,
}

impl ActionGrid {
    pub fn new(entries: Vec<ActionGridEntry>) -> Self {
        ActionGrid { entries }
    }

    /// One entry per actionable non-categorical feature with deltas
    /// `±step, ±2·step, ... ±max_steps·step` and unit cost `1/step`.
    pub fn from_schema(schema: &FeatureSchema, max_steps: usize) -> Self {
        use crate::schema::{Direction, Mutability};
        let entries = schema
            .features()
            .iter()
            .filter(|f| f.mutability != Mutability::Immutable && f.kind != FeatureKind::Categorical)
            .map(|f| {
                let step = match f.kind {
                    FeatureKind::Ordinal => f
                        .values
                        .windows(2)
                        .map(|w| w[1] - w[0])
                        .fold(f64::INFINITY, f64::min),
                    _ => f.step.unwrap_or((f.hi() - f.lo()) / DEFAULT_INTERVALS),
                };
                let step = if step.is_finite() && step > 0.0 { step } else { 1.0 };
                let mut deltas = Vec::new();
                for k in 1..=max_steps {
                    let d = k as f64 * step;
                    if f.direction != Direction::DecreaseOnly {
                        deltas.push(d);
                    }
                    if f.direction != Direction::IncreaseOnly {
                        deltas.push(-d);
                    }
                }
                ActionGridEntry {
                    feature: f.name.clone(),
                    deltas,
                    unit_cost: 1.0 / step,
                    condition: f.condition.clone(),
                }
            })
            .collect();
        ActionGrid { entries }
    }
}
