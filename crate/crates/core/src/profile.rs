//! Customer profile files: feature values plus optional presentation data.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;
use crate::schema::{FeatureSchema, FeatureVector};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Profile {
    /// Template key, e.g. a scenario number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer: Option<String>,
    /// Features the explanation should talk about; empty means any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub focus: Vec<String>,
    pub values: Map<String, Value>,
}

impl Profile {
    /// Accepts either a full profile document or a bare `{feature: value}` map.
    pub fn from_json(value: Value) -> Result<Self> {
        match value {
            Value::Object(obj) if obj.get("values").is_some_and(Value::is_object) => {
                Ok(serde_json::from_value(Value::Object(obj))?)
            }
            Value::Object(values) => Ok(Profile {
                values,
                ..Profile::default()
            }),
            other => Ok(serde_json::from_value(other)?),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Profile::from_json(serde_json::from_str(&text)?)
    }

    pub fn vector(&self, schema: &FeatureSchema) -> Result<FeatureVector> {
        for f in &self.focus {
            schema.index_of(f)?;
        }
        schema.vector_from_json(&self.values)
    }
}
