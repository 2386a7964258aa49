use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Label;
use crate::schema::{FeatureKind, FeatureSpec};

/// Phrase templates for one explanation context. Unset fields fall back to
/// the defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greeting: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
    /// Counterfactual clause of the non-directive text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nd_counterfactual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filler: Option<String>,
    /// Counterfactual clause of the directive texts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterfactual: Option<String>,
    /// Overrides `counterfactual` for the generic text only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generic_counterfactual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specific: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generic: Option<String>,
    /// Extra sentences appended to the filler when it is too short.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub elaborations: Vec<String>,
}

/// Per-feature phrases used to build the `{changes}`, `{changes_past}` and
/// `{basis}` slots.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureTemplate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub past: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
}

/// Template file: defaults, per-feature phrases and per-scenario entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSet {
    /// Defaults when the counterfactual flips the decision toward the
    /// requested outcome.
    pub default: TemplateEntry,
    /// Defaults when the decision already matches and the explanation
    /// describes the nearest boundary instead.
    pub default_boundary: TemplateEntry,
    pub features: BTreeMap<String, FeatureTemplate>,
    pub scenarios: BTreeMap<String, TemplateEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Field {
    Greeting,
    Global,
    Decision,
    NdCounterfactual,
    Filler,
    Counterfactual,
    GenericCounterfactual,
    Specific,
    Generic,
}

impl TemplateEntry {
    fn get(&self, field: Field) -> Option<&str> {
        match field {
            Field::Greeting => self.greeting.as_deref(),
            Field::Global => self.global.as_deref(),
            Field::Decision => self.decision.as_deref(),
            Field::NdCounterfactual => self.nd_counterfactual.as_deref(),
            Field::Filler => self.filler.as_deref(),
            Field::Counterfactual => self.counterfactual.as_deref(),
            Field::GenericCounterfactual => self
                .generic_counterfactual
                .as_deref()
                .or(self.counterfactual.as_deref()),
            Field::Specific => self.specific.as_deref(),
            Field::Generic => self.generic.as_deref(),
        }
    }
}

fn builtin(boundary: bool, field: Field) -> &'static str {
    match (boundary, field) {
        (_, Field::Greeting) => "Hello {customer}.",
        (_, Field::Global) => "Your details were supplied to a credit-scoring algorithm",
        (_, Field::Decision) => "that decided to {decision} your application based on {basis}.",
        (false, Field::NdCounterfactual | Field::Counterfactual | Field::GenericCounterfactual) => {
            "For your application to be {outcome}, {changes}."
        }
        (false, Field::Filler) => "If {changes_past}, the decision would have been to {target_decision}.",
        (false, Field::Specific) => "You could {action}.",
        (false, Field::Generic) => "You should find approaches to {class}.",
        (true, Field::NdCounterfactual) => "Your application would have been {outcome} with different details.",
        (true, Field::Filler) => "If {changes_past}, the decision would have been to {target_decision}.",
        (true, Field::Counterfactual | Field::GenericCounterfactual) => {
            "Your application would have been {outcome} if {changes_past}."
        }
        (true, Field::Specific) => "If you were to {action}, the decision could change.",
        (true, Field::Generic) => "If you were to {class}, the decision could change.",
    }
}

const BUILTIN_ELABORATIONS: [&str; 2] = [
    "This is the smallest change to your details that would alter the decision.",
    "Every other detail of your application would stay as it is.",
];

impl TemplateSet {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TemplateSet::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Scenario entry, then the matching defaults, then built-in phrasing.
    pub(crate) fn resolve(&self, scenario: Option<&str>, boundary: bool, field: Field) -> &str {
        let base = if boundary { &self.default_boundary } else { &self.default };
        scenario
            .and_then(|s| self.scenarios.get(s))
            .and_then(|e| e.get(field))
            .or_else(|| base.get(field))
            .unwrap_or_else(|| builtin(boundary, field))
    }

    pub(crate) fn elaborations(&self, scenario: Option<&str>, boundary: bool) -> Vec<String> {
        let base = if boundary { &self.default_boundary } else { &self.default };
        let own = scenario.and_then(|s| self.scenarios.get(s)).map(|e| &e.elaborations);
        match own.filter(|e| !e.is_empty()) {
            Some(e) => e.clone(),
            None if !base.elaborations.is_empty() => base.elaborations.clone(),
            None => BUILTIN_ELABORATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub(crate) fn feature_phrase(&self, feature: &str, which: Phrase, has_boundary: bool) -> String {
        let own = self.features.get(feature).and_then(|t| match which {
            Phrase::Change => t.change.clone(),
            Phrase::Past => t.past.clone(),
            Phrase::Basis => t.basis.clone(),
        });
        own.unwrap_or_else(|| {
            let f = feature;
            match (which, has_boundary) {
                (Phrase::Change, true) => format!("your {{name:{f}}} needs to be {{relation:{f}}} {{boundary:{f}}}"),
                (Phrase::Change, false) => format!("your {{name:{f}}} needs to be {{target:{f}}}"),
                (Phrase::Past, true) => format!("your {{name:{f}}} had been {{relation:{f}}} {{boundary:{f}}}"),
                (Phrase::Past, false) => format!("your {{name:{f}}} had been {{target:{f}}}"),
                (Phrase::Basis, _) => format!("your {{name:{f}}}"),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phrase {
    Change,
    Past,
    Basis,
}

/// Past participle used in "for your application to be ...".
pub(crate) fn outcome_word(label: Label) -> &'static str {
    match label {
        Label::Positive => "accepted",
        Label::Negative => "denied",
    }
}

const WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

fn plain_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Display form of a feature value: category or ordinal label if declared,
/// otherwise the number with a `$` prefix or `%` suffix for those units.
pub fn format_value(spec: &FeatureSpec, v: f64, words: bool) -> String {
    if let Some(c) = spec.category(v) {
        return c.to_string();
    }
    if let Some(l) = spec.ordinal_label(v) {
        return l.to_string();
    }
    if words && spec.kind != FeatureKind::Categorical && v.fract() == 0.0 && (0.0..=20.0).contains(&v) {
        return WORDS[v as usize].to_string();
    }
    let n = plain_number(v);
    match spec.unit.as_str() {
        "$" => format!("${n}"),
        "%" => format!("{n}%"),
        _ => n,
    }
}

/// Expands `{slot}`, `{slot:feature}` and `{slot:feature|words}` using
/// `lookup(slot, feature, words)`. `{{` and `}}` are literal braces.
pub(crate) fn expand(
    template: &str,
    lookup: &mut dyn FnMut(&str, Option<&str>, bool) -> Result<String>,
) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if tail.starts_with('}') {
            return Err(Error::Template(format!("unmatched `}}` in `{template}`")));
        }
        let end = tail
            .find('}')
            .ok_or_else(|| Error::Template(format!("unterminated slot in `{template}`")))?;
        let inner = &tail[1..end];
        let (inner, words) = match inner.strip_suffix("|words") {
            Some(s) => (s, true),
            None => (inner, false),
        };
        let (slot, feature) = match inner.split_once(':') {
            Some((s, f)) => (s.trim(), Some(f.trim())),
            None => (inner.trim(), None),
        };
        if slot.is_empty() {
            return Err(Error::Template(format!("empty slot in `{template}`")));
        }
        out.push_str(&lookup(slot, feature, words)?);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
