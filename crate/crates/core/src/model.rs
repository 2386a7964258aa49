//! Logistic classifier over a [`FeatureSchema`] and single-feature decision
//! boundary probing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSchema, FeatureVector};

/// Binary decision. `Positive` is the favourable outcome (loan approved).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    /// Accepts `0`/`1`, `deny`/`approve`, `negative`/`positive`.
    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "deny" | "denied" | "reject" | "negative" => Some(Label::Negative),
            "1" | "approve" | "approved" | "accept" | "positive" => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn decision_word(self) -> &'static str {
        match self {
            Label::Negative => "deny",
            Label::Positive => "approve",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let parsed = match &v {
            Value::Number(n) => n.as_u64().and_then(|n| u8::try_from(n).ok()).and_then(Label::from_u8),
            Value::String(s) => Label::parse(s),
            Value::Bool(b) => Some(if *b { Label::Positive } else { Label::Negative }),
            _ => None,
        };
        parsed.ok_or_else(|| serde::de::Error::custom(format!("invalid label {v}")))
    }
}

/// Coefficient of one feature. Categorical features carry one weight per
/// category (one-hot), in category order.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Scalar(f64),
    Categorical(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    schema: FeatureSchema,
    weights: Vec<Weight>,
    bias: f64,
    threshold: f64,
    metadata: Map<String, Value>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// Keeps probabilities inside the open unit interval even when exp saturates.
const PROBA_FLOOR: f64 = f64::EPSILON;

/// Relative accuracy of [`LinearModel::pdp_threshold`] (fraction of the
/// feature's range).
pub const PDP_TOLERANCE: f64 = 1e-6;

impl LinearModel {
    pub fn new(schema: FeatureSchema, weights: Vec<Weight>, bias: f64, threshold: f64) -> Result<Self> {
        if weights.len() != schema.len() {
            return Err(Error::Model(format!(
                "{} weights for {} features",
                weights.len(),
                schema.len()
            )));
        }
        for (f, w) in schema.features().iter().zip(&weights) {
            match (f.kind, w) {
                (FeatureKind::Categorical, Weight::Categorical(ws)) if ws.len() == f.categories.len() => {}
                (FeatureKind::Categorical, _) => {
                    return Err(Error::Model(format!(
                        "`{}` needs one weight per category",
                        f.name
                    )))
                }
                (_, Weight::Scalar(_)) => {}
                (_, Weight::Categorical(_)) => {
                    return Err(Error::Model(format!("`{}` is not categorical", f.name)))
                }
            }
            let finite = match w {
                Weight::Scalar(v) => v.is_finite(),
                Weight::Categorical(ws) => ws.iter().all(|v| v.is_finite()),
            };
            if !finite {
                return Err(Error::Model(format!("`{}` has a non-finite weight", f.name)));
            }
        }
        if !bias.is_finite() {
            return Err(Error::Model("non-finite bias".into()));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Model(format!("threshold {threshold} outside (0, 1)")));
        }
        Ok(LinearModel {
            schema,
            weights,
            bias,
            threshold,
            metadata: Map::new(),
        })
    }

    /// Convenience constructor for all-scalar schemas.
    pub fn from_scalars(schema: FeatureSchema, weights: &[f64], bias: f64, threshold: f64) -> Result<Self> {
        LinearModel::new(schema, weights.iter().map(|&w| Weight::Scalar(w)).collect(), bias, threshold)
    }

    pub fn with_metadata(mut self, metadata: Map<String, Value>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn metadata(&self) -> &Map<String, Value> {
        &self.metadata
    }

    /// Contribution of feature `i` at value `v` to the log-odds.
    pub fn contribution(&self, i: usize, v: f64) -> f64 {
        match &self.weights[i] {
            Weight::Scalar(w) => w * v,
            Weight::Categorical(ws) => ws.get(v as usize).copied().unwrap_or(0.0),
        }
    }

    /// Log-odds `w·x + b`.
    pub fn logit(&self, x: &FeatureVector) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.logit_unchecked(x))
    }

    pub(crate) fn logit_unchecked(&self, x: &FeatureVector) -> f64 {
        x.values()
            .iter()
            .enumerate()
            .fold(self.bias, |acc, (i, &v)| acc + self.contribution(i, v))
    }

    fn check_len(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.schema.len() {
            let missing = self
                .schema
                .features()
                .get(x.len())
                .map(|f| f.name.clone())
                .unwrap_or_else(|| "<extra values>".to_string());
            return Err(Error::MissingFeature(missing));
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        Ok(self.proba_of_logit(self.logit(x)?))
    }

    pub(crate) fn proba_of_logit(&self, z: f64) -> f64 {
        sigmoid(z).clamp(PROBA_FLOOR, 1.0 - PROBA_FLOOR)
    }

    /// Positive iff the probability reaches the threshold (ties are positive).
    pub fn classify(&self, x: &FeatureVector) -> Result<Label> {
        Ok(self.label_of_proba(self.predict_proba(x)?))
    }

    pub(crate) fn label_of_proba(&self, p: f64) -> Label {
        if p >= self.threshold {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub(crate) fn classify_unchecked(&self, x: &FeatureVector) -> Label {
        self.label_of_proba(self.proba_of_logit(self.logit_unchecked(x)))
    }

    /// Value of feature `i` at which the decision flips with every other
    /// feature held at `x`. `None` when the decision is constant over the
    /// feature's bounds.
    pub fn pdp_threshold(&self, x: &FeatureVector, i: usize) -> Result<Option<f64>> {
        self.check_len(x)?;
        let f = self.schema.feature(i);
        if f.kind == FeatureKind::Categorical {
            return Err(Error::Categorical(f.name.clone()));
        }
        let (lo, hi) = (f.lo(), f.hi());
        let label_at = |v: f64| self.classify_unchecked(&x.with(i, v));
        let (llo, lhi) = (label_at(lo), label_at(hi));
        if llo == lhi {
            return Ok(None);
        }
        let tol = PDP_TOLERANCE * (hi - lo) * 1e-3;
        let (mut a, mut b) = (lo, hi);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if label_at(mid) == llo {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(Some(0.5 * (a + b)))
    }

    /// `(value, probability)` on an evenly spaced grid over feature `i`'s bounds.
    pub fn pdp_curve(&self, x: &FeatureVector, i: usize, grid_size: usize) -> Result<Vec<(f64, f64)>> {
        self.check_len(x)?;
        if grid_size < 2 {
            return Err(Error::GridSize(grid_size));
        }
        let f = self.schema.feature(i);
        let (lo, hi) = (f.lo(), f.hi());
        let n = (grid_size - 1) as f64;
        Ok((0..grid_size)
            .map(|k| {
                let v = if k == grid_size - 1 { hi } else { lo + (hi - lo) * k as f64 / n };
                let p = self.proba_of_logit(self.logit_unchecked(&x.with(i, v)));
                (v, p)
            })
            .collect())
    }

    /// Short content digest identifying this model.
    pub fn digest(&self) -> String {
        let doc = serde_json::to_vec(&ModelDocument::from(self)).unwrap_or_default();
        let hash = Sha256::digest(&doc);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        LinearModel::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json_pretty();
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightDoc {
    Scalar(f64),
    Categorical(BTreeMap<String, f64>),
}

/// On-disk model file: `{schema, weights, bias, threshold, metadata}`.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema: FeatureSchema,
    weights: BTreeMap<String, WeightDoc>,
    bias: f64,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default)]
    metadata: Map<String, Value>,
}

fn default_threshold() -> f64 {
    0.5
}

impl From<&LinearModel> for ModelDocument {
    fn from(m: &LinearModel) -> Self {
        let weights = m
            .schema
            .features()
            .iter()
            .zip(&m.weights)
            .map(|(f, w)| {
                let doc = match w {
                    Weight::Scalar(v) => WeightDoc::Scalar(*v),
                    Weight::Categorical(ws) => {
                        WeightDoc::Categorical(f.categories.iter().cloned().zip(ws.iter().copied()).collect())
                    }
                };
                (f.name.clone(), doc)
            })
            .collect();
        ModelDocument {
            schema: m.schema.clone(),
            weights,
            bias: m.bias,
            threshold: m.threshold,
            metadata: m.metadata.clone(),
        }
    }
}

impl TryFrom<ModelDocument> for LinearModel {
    type Error = Error;

    fn try_from(mut doc: ModelDocument) -> Result<Self> {
        let mut weights = Vec::with_capacity(doc.schema.len());
        for f in doc.schema.features() {
            let w = doc
                .weights
                .remove(&f.name)
                .ok_or_else(|| Error::Model(format!("no weight for `{}`", f.name)))?;
            weights.push(match (f.kind, w) {
                (FeatureKind::Categorical, WeightDoc::Categorical(mut m)) => {
                    let ws = f
                        .categories
                        .iter()
                        .map(|c| {
                            m.remove(c).ok_or_else(|| {
                                Error::Model(format!("`{}`: no weight for category `{c}`", f.name))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if let Some(extra) = m.keys().next() {
                        return Err(Error::Model(format!("`{}`: unknown category `{extra}`", f.name)));
                    }
                    Weight::Categorical(ws)
                }
                (FeatureKind::Categorical, WeightDoc::Scalar(_)) => {
                    return Err(Error::Model(format!("`{}` needs per-category weights", f.name)))
                }
                (_, WeightDoc::Scalar(v)) => Weight::Scalar(v),
                (_, WeightDoc::Categorical(_)) => {
                    return Err(Error::Model(format!("`{}` is not categorical", f.name)))
                }
            });
        }
        if let Some(extra) = doc.weights.keys().next() {
            return Err(Error::Model(format!("weight for unknown feature `{extra}`")));
        }
        Ok(LinearModel::new(doc.schema, weights, doc.bias, doc.threshold)?.with_metadata(doc.metadata))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn two_feature(w: [f64; 2], bias: f64) -> LinearModel {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("a", -10.0, 10.0),
            FeatureSpec::continuous("b", -10.0, 10.0),
        ])
        .unwrap();
        LinearModel::from_scalars(schema, &w, bias, 0.5).unwrap()
    }

    #[test]
    fn zero_model_is_half() {
        let m = two_feature([0.0, 0.0], 0.0);
        let p = m.predict_proba(&FeatureVector::new(vec![3.0, -7.0])).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn closed_form_sigmoid() {
        let m = two_feature([1.0, -1.0], 0.0);
        let p = m.predict_proba(&FeatureVector::new(vec![2.0, 1.0])).unwrap();
        assert!((p - 0.7310585786).abs() < 1e-9, "{p}");
    }

    #[test]
    fn saturates_above_boundary() {
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("income", 0.0, 2.0)]).unwrap();
        // 1000 per unit of income (in units of $42000), boundary at 1.0.
        let m = LinearModel::from_scalars(schema, &[1000.0], -1000.0, 0.5).unwrap();
        let p = m.predict_proba(&FeatureVector::new(vec![43000.0 / 42000.0])).unwrap();
        assert!(p > 0.999);
        assert!(p < 1.0);
    }

    #[test]
    fn tie_classifies_positive() {
        let m = two_feature([1.0, 0.0], 0.0);
        assert_eq!(m.classify(&FeatureVector::new(vec![0.0, 0.0])).unwrap(), Label::Positive);
        assert_eq!(m.classify(&FeatureVector::new(vec![-1e-9, 0.0])).unwrap(), Label::Negative);
    }

    #[test]
    fn missing_value_is_an_error() {
        let m = two_feature([1.0, 0.0], 0.0);
        assert!(matches!(
            m.predict_proba(&FeatureVector::new(vec![1.0])),
            Err(Error::MissingFeature(name)) if name == "b"
        ));
    }

    #[test]
    fn pdp_threshold_midpoint_and_flat() {
        let m = two_feature([1.0, 0.0], 0.0);
        let x = FeatureVector::new(vec![5.0, 5.0]);
        let v = m.pdp_threshold(&x, 0).unwrap().unwrap();
        assert!(v.abs() < 20.0 * PDP_TOLERANCE, "{v}");
        assert_eq!(m.pdp_threshold(&x, 1).unwrap(), None);
    }

    #[test]
    fn pdp_rejects_categorical() {
        let schema = FeatureSchema::new(vec![FeatureSpec::categorical("c", &["x", "y"])]).unwrap();
        let m = LinearModel::new(schema, vec![Weight::Categorical(vec![0.0, 1.0])], 0.0, 0.5).unwrap();
        assert!(matches!(
            m.pdp_threshold(&FeatureVector::new(vec![0.0]), 0),
            Err(Error::Categorical(_))
        ));
    }

    #[test]
    fn pdp_curve_endpoints_and_constant() {
        let m = two_feature([0.5, 0.0], 0.2);
        let x = FeatureVector::new(vec![1.0, 1.0]);
        let c = m.pdp_curve(&x, 0, 2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].0, -10.0);
        assert_eq!(c[1].0, 10.0);
        let flat = m.pdp_curve(&x, 1, 11).unwrap();
        assert!(flat.windows(2).all(|w| w[0].1 == w[1].1));
        assert!(matches!(m.pdp_curve(&x, 0, 1), Err(Error::GridSize(1))));
    }

    #[test]
    fn model_document_round_trip() {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("a", 0.0, 1.0),
            FeatureSpec::categorical("c", &["x", "y"]),
        ])
        .unwrap();
        let m = LinearModel::new(
            schema,
            vec![Weight::Scalar(0.25), Weight::Categorical(vec![-1.0, 1.0])],
            0.1,
            0.6,
        )
        .unwrap();
        let back = LinearModel::from_json_str(&m.to_json_pretty()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
    }

    #[test]
    fn model_document_rejects_unknown_weight() {
        let doc = r#"{"schema":{"features":[{"name":"a","kind":"continuous","bounds":[0,1],"mutability":"actionable"}]},
                      "weights":{"a":1.0,"b":2.0},"bias":0}"#;
        assert!(LinearModel::from_json_str(doc).is_err());
    }
}
