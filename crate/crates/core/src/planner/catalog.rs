use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Clause, FeatureKind, FeatureSchema, Mutability};

pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub feature: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub probability: f64,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    /// General class the action belongs to, used by generic explanations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_tag: Option<String>,
    pub cost: f64,
    pub outcomes: Vec<Outcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditions: Vec<Clause>,
}

impl Action {
    /// Deterministic action with a single outcome.
    pub fn deterministic(name: &str, class_tag: &str, cost: f64, effects: &[(&str, f64)]) -> Self {
        Action {
            name: name.to_string(),
            class_tag: Some(class_tag.to_string()),
            cost,
            outcomes: vec![Outcome {
                probability: 1.0,
                effects: effects
                    .iter()
                    .map(|(f, d)| Effect {
                        feature: f.to_string(),
                        delta: *d,
                    })
                    .collect(),
            }],
            preconditions: Vec::new(),
        }
    }

    pub fn with_preconditions(mut self, preconditions: Vec<Clause>) -> Self {
        self.preconditions = preconditions;
        self
    }

    /// Every feature touched by some outcome.
    pub fn touched(&self) -> impl Iterator<Item = &str> {
        self.outcomes
            .iter()
            .flat_map(|o| o.effects.iter().map(|e| e.feature.as_str()))
    }
}

/// The general class of an action.
pub fn generic_class_of(action: &Action) -> Result<&str> {
    action
        .class_tag
        .as_deref()
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| Error::Catalog(format!("action `{}` has no class tag", action.name)))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCatalog {
    pub actions: Vec<Action>,
}

impl ActionCatalog {
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        let c = ActionCatalog { actions };
        c.check()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: ActionCatalog = serde_json::from_str(s)?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ActionCatalog::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn class_tags(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().filter_map(|a| a.class_tag.as_deref())
    }

    /// Schema-independent checks: names, costs and outcome distributions.
    fn check(&self) -> Result<()> {
        let mut names = HashSet::new();
        for a in &self.actions {
            if a.name.trim().is_empty() {
                return Err(Error::Catalog("action with empty name".into()));
            }
            if !names.insert(a.name.as_str()) {
                return Err(Error::Catalog(format!("duplicate action `{}`", a.name)));
            }
            if !(a.cost.is_finite() && a.cost >= 0.0) {
                return Err(Error::Catalog(format!("action `{}`: cost must be finite and >= 0", a.name)));
            }
            if a.outcomes.is_empty() {
                return Err(Error::Catalog(format!("action `{}` has no outcomes", a.name)));
            }
            let mut total = 0.0;
            for o in &a.outcomes {
                if !(o.probability.is_finite() && (0.0..=1.0).contains(&o.probability)) {
                    return Err(Error::Catalog(format!(
                        "action `{}`: outcome probability {} outside [0, 1]",
                        a.name, o.probability
                    )));
                }
                if let Some(e) = o.effects.iter().find(|e| !e.delta.is_finite()) {
                    return Err(Error::Catalog(format!(
                        "action `{}`: non-finite delta on `{}`",
                        a.name, e.feature
                    )));
                }
                total += o.probability;
            }
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::Catalog(format!(
                    "action `{}`: outcome probabilities sum to {total}",
                    a.name
                )));
            }
        }
        Ok(())
    }

    /// Checks the catalog against a schema: effects must name known,
    /// ordered, mutable features and respect their direction.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        self.check()?;
        for a in &self.actions {
            for c in &a.preconditions {
                schema.index_of(&c.feature)?;
            }
            for o in &a.outcomes {
                for e in &o.effects {
                    let f = schema.feature(schema.index_of(&e.feature)?);
                    if f.mutability == Mutability::Immutable {
                        return Err(Error::Catalog(format!(
                            "action `{}` changes immutable feature `{}`",
                            a.name, e.feature
                        )));
                    }
                    if f.kind == FeatureKind::Categorical {
                        return Err(Error::Catalog(format!(
                            "action `{}` applies a delta to categorical feature `{}`",
                            a.name, e.feature
                        )));
                    }
                    if !f.direction.allows(0.0, e.delta) {
                        return Err(Error::Catalog(format!(
                            "action `{}`: delta {} on `{}` violates its direction",
                            a.name, e.delta, e.feature
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
