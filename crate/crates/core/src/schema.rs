//! Feature declarations and schema-checked feature vectors.
//!
//! A [`FeatureSchema`] fixes the order, domain and mutability of every
//! feature. [`FeatureVector`] stores values in schema order; categorical
//! values are stored as the index of their category.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Continuous,
    Ordinal,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutability {
    Immutable,
    ConditionallyMutable,
    Actionable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Free,
    IncreaseOnly,
    DecreaseOnly,
}

impl Direction {
    pub fn allows(self, from: f64, to: f64) -> bool {
        match self {
            Direction::Free => true,
            Direction::IncreaseOnly => to >= from,
            Direction::DecreaseOnly => to <= from,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

/// A single bound/threshold test on one feature, e.g. `income > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub feature: String,
    pub op: Comparison,
    pub value: f64,
}

impl Clause {
    pub fn holds(&self, schema: &FeatureSchema, x: &FeatureVector) -> Result<bool> {
        let v = x.get(schema.index_of(&self.feature)?);
        Ok(match self.op {
            Comparison::Lt => v < self.value,
            Comparison::Le => v <= self.value,
            Comparison::Gt => v > self.value,
            Comparison::Ge => v >= self.value,
            Comparison::Eq => v == self.value,
            Comparison::Ne => v != self.value,
        })
    }
}

/// Conjunction of clauses; an empty list always holds.
pub fn all_hold(clauses: &[Clause], schema: &FeatureSchema, x: &FeatureVector) -> Result<bool> {
    for c in clauses {
        if !c.holds(schema, x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    /// Human readable name used in explanations; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: FeatureKind,
    /// `[lo, hi]` in feature units. Derived for categorical features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    /// Admissible values of an ordinal feature.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// Display labels of ordinal values, parallel to `values`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default)]
    pub unit: String,
    pub mutability: Mutability,
    #[serde(default)]
    pub direction: Direction,
    /// Search/binning step for continuous features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// For conditionally-mutable features: the feature may change only for
    /// instances satisfying every clause.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub condition: Vec<Clause>,
}

impl FeatureSpec {
    pub fn continuous(name: &str, lo: f64, hi: f64) -> Self {
        FeatureSpec {
            name: name.to_string(),
            label: None,
            kind: FeatureKind::Continuous,
            bounds: Some([lo, hi]),
            values: Vec::new(),
            labels: Vec::new(),
            categories: Vec::new(),
            unit: String::new(),
            mutability: Mutability::Actionable,
            direction: Direction::Free,
            step: None,
            condition: Vec::new(),
        }
    }

    pub fn ordinal(name: &str, values: Vec<f64>) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        FeatureSpec {
            kind: FeatureKind::Ordinal,
            bounds: Some([lo, hi]),
            values,
            ..FeatureSpec::continuous(name, lo, hi)
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        FeatureSpec {
            kind: FeatureKind::Categorical,
            bounds: Some([0.0, categories.len().saturating_sub(1) as f64]),
            categories: categories.iter().map(|c| c.to_string()).collect(),
            ..FeatureSpec::continuous(name, 0.0, 0.0)
        }
    }

    pub fn with_mutability(mut self, mutability: Mutability) -> Self {
        self.mutability = mutability;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = unit.to_string();
        self
    }

    pub fn display_name(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn lo(&self) -> f64 {
        self.bounds.map(|b| b[0]).unwrap_or(0.0)
    }

    pub fn hi(&self) -> f64 {
        self.bounds.map(|b| b[1]).unwrap_or(0.0)
    }

    pub fn in_domain(&self, v: f64) -> bool {
        if !v.is_finite() || v < self.lo() || v > self.hi() {
            return false;
        }
        match self.kind {
            FeatureKind::Continuous => true,
            FeatureKind::Ordinal => self.values.contains(&v),
            FeatureKind::Categorical => v.fract() == 0.0 && (v as usize) < self.categories.len(),
        }
    }

    /// Category name for a categorical code.
    pub fn category(&self, code: f64) -> Option<&str> {
        if self.kind != FeatureKind::Categorical || code < 0.0 || code.fract() != 0.0 {
            return None;
        }
        self.categories.get(code as usize).map(String::as_str)
    }

    /// Display label of an ordinal value, if labels are declared.
    pub fn ordinal_label(&self, v: f64) -> Option<&str> {
        let i = self.values.iter().position(|&x| x == v)?;
        self.labels.get(i).map(String::as_str)
    }

    fn parse_value(&self, value: &Value) -> Result<f64> {
        match value {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::Nonconforming(format!("`{}`: not a finite number", self.name))),
            Value::String(s) => match self.kind {
                FeatureKind::Categorical => self
                    .categories
                    .iter()
                    .position(|c| c == s)
                    .map(|i| i as f64)
                    .ok_or_else(|| {
                        Error::Nonconforming(format!("`{}`: unknown category `{s}`", self.name))
                    }),
                FeatureKind::Ordinal if !self.labels.is_empty() => self
                    .labels
                    .iter()
                    .position(|l| l == s)
                    .map(|i| self.values[i])
                    .ok_or_else(|| {
                        Error::Nonconforming(format!("`{}`: unknown label `{s}`", self.name))
                    }),
                _ => s.trim().parse::<f64>().map_err(|_| {
                    Error::Nonconforming(format!("`{}`: cannot parse `{s}` as a number", self.name))
                }),
            },
            other => Err(Error::Nonconforming(format!(
                "`{}`: unsupported value {other}",
                self.name
            ))),
        }
    }

    fn value_to_json(&self, v: f64) -> Value {
        if let Some(c) = self.category(v) {
            return Value::String(c.to_string());
        }
        if let Some(l) = self.ordinal_label(v) {
            return Value::String(l.to_string());
        }
        number(v)
    }
}

/// JSON number, written as an integer when the value is integral.
pub(crate) fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        serde_json::Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.features)
    }
}

impl From<FeatureSchema> for RawSchema {
    fn from(s: FeatureSchema) -> Self {
        RawSchema {
            features: s.features,
        }
    }
}

impl FeatureSchema {
    pub fn new(mut features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("no features declared".into()));
        }
        let mut seen = HashSet::new();
        for f in &mut features {
            if !seen.insert(f.name.clone()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            match f.kind {
                FeatureKind::Categorical => {
                    if f.categories.is_empty() {
                        return Err(Error::Schema(format!("`{}`: no categories", f.name)));
                    }
                    f.bounds = Some([0.0, (f.categories.len() - 1) as f64]);
                }
                FeatureKind::Ordinal => {
                    if f.values.is_empty() {
                        return Err(Error::Schema(format!("`{}`: no ordinal values", f.name)));
                    }
                    if f.values.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Schema(format!(
                            "`{}`: ordinal values must be strictly increasing",
                            f.name
                        )));
                    }
                    if !f.labels.is_empty() && f.labels.len() != f.values.len() {
                        return Err(Error::Schema(format!(
                            "`{}`: {} labels for {} values",
                            f.name,
                            f.labels.len(),
                            f.values.len()
                        )));
                    }
                    let (lo, hi) = (f.values[0], f.values[f.values.len() - 1]);
                    match f.bounds {
                        None => f.bounds = Some([lo, hi]),
                        Some([blo, bhi]) if blo > lo || bhi < hi => {
                            return Err(Error::Schema(format!(
                                "`{}`: ordinal values outside bounds",
                                f.name
                            )))
                        }
                        _ => {}
                    }
                }
                FeatureKind::Continuous => {
                    if f.bounds.is_none() {
                        return Err(Error::Schema(format!("`{}`: missing bounds", f.name)));
                    }
                }
            }
            let [lo, hi] = f.bounds.unwrap_or([0.0, 0.0]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Schema(format!("`{}`: invalid bounds [{lo}, {hi}]", f.name)));
            }
            if let Some(step) = f.step {
                if !(step.is_finite() && step > 0.0) {
                    return Err(Error::Schema(format!("`{}`: step must be positive", f.name)));
                }
            }
        }
        let schema = FeatureSchema { features };
        for f in &schema.features {
            for c in &f.condition {
                schema.index_of(&c.feature)?;
            }
        }
        Ok(schema)
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, i: usize) -> &FeatureSpec {
        &self.features[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// True when at least one feature can ever change.
    pub fn has_mutable(&self) -> bool {
        self.features
            .iter()
            .any(|f| f.mutability != Mutability::Immutable)
    }

    /// Whether feature `i` may change for instance `x` (membership in A(x)).
    pub fn is_actionable_for(&self, i: usize, x: &FeatureVector) -> Result<bool> {
        let f = &self.features[i];
        match f.mutability {
            Mutability::Immutable => Ok(false),
            Mutability::Actionable => Ok(true),
            Mutability::ConditionallyMutable => all_hold(&f.condition, self, x),
        }
    }

    pub fn validate(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Nonconforming(format!(
                "expected {} values, got {}",
                self.len(),
                x.len()
            )));
        }
        for (f, &v) in self.features.iter().zip(x.values()) {
            if !f.in_domain(v) {
                return Err(Error::Nonconforming(format!(
                    "`{}` = {v} is outside its domain",
                    f.name
                )));
            }
        }
        Ok(())
    }

    /// Builds a vector from a name-keyed JSON object; keys must match the
    /// schema exactly.
    pub fn vector_from_json(&self, obj: &Map<String, Value>) -> Result<FeatureVector> {
        for key in obj.keys() {
            self.index_of(key)?;
        }
        let values = self
            .features
            .iter()
            .map(|f| {
                let v = obj
                    .get(&f.name)
                    .ok_or_else(|| Error::MissingFeature(f.name.clone()))?;
                f.parse_value(v)
            })
            .collect::<Result<Vec<_>>>()?;
        let x = FeatureVector::new(values);
        self.validate(&x)?;
        Ok(x)
    }

    /// Applies name-keyed overrides to `base`, validating the result.
    pub fn with_changes(&self, base: &FeatureVector, changes: &Map<String, Value>) -> Result<FeatureVector> {
        let mut x = base.clone();
        for (k, v) in changes {
            let i = self.index_of(k)?;
            x.set(i, self.features[i].parse_value(v)?);
        }
        self.validate(&x)?;
        Ok(x)
    }

    pub fn vector_to_json(&self, x: &FeatureVector) -> Map<String, Value> {
        self.features
            .iter()
            .zip(x.values())
            .map(|(f, &v)| (f.name.clone(), f.value_to_json(v)))
            .collect()
    }

    /// Parses a single textual cell (CSV) for feature `i`.
    pub fn parse_cell(&self, i: usize, cell: &str) -> Result<f64> {
        let f = &self.features[i];
        let cell = cell.trim();
        match cell.parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => f.parse_value(&Value::String(cell.to_string())),
        }
    }

    /// Returns a copy of this schema with one extra feature appended.
    pub fn extended(&self, spec: FeatureSpec) -> Result<Self> {
        let mut features = self.features.clone();
        features.push(spec);
        FeatureSchema::new(features)
    }
}

/// Feature values in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    pub fn with(&self, i: usize, v: f64) -> Self {
        let mut out = self.clone();
        out.values[i] = v;
        out
    }

    /// Indices where the two vectors differ.
    pub fn diff(&self, other: &FeatureVector) -> Vec<usize> {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect()
    }
}
