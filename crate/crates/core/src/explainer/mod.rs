//! Directive explanations: the tuple of instance, counterfactual, plan,
//! model and labels, and its rendering as non-directive,
//! directive-specific and directive-generic texts.

mod balance;
mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use balance::{balance_filler, within_band, BALANCE_BAND};
pub use templates::{format_value, FeatureTemplate, TemplateEntry, TemplateSet};

use crate::counterfactual::{stepped, Counterfactual, DEFAULT_INTERVALS};
use crate::error::{Error, Result};
use crate::model::{Label, LinearModel};
use crate::planner::{generic_class_of, reachability, PlanStep, Policy, RecourseMdp};
use crate::schema::{FeatureKind, FeatureSchema, FeatureSpec, FeatureVector};
use templates::{expand, outcome_word, Field, Phrase};

/// Longest plan kept in an explanation.
pub const MAX_PLAN_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplanationKind {
    NonDirective,
    DirectiveSpecific,
    DirectiveGeneric,
}

impl ExplanationKind {
    pub const ALL: [ExplanationKind; 3] = [
        ExplanationKind::NonDirective,
        ExplanationKind::DirectiveSpecific,
        ExplanationKind::DirectiveGeneric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExplanationKind::NonDirective => "non-directive",
            ExplanationKind::DirectiveSpecific => "directive-specific",
            ExplanationKind::DirectiveGeneric => "directive-generic",
        }
    }
}

impl fmt::Display for ExplanationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExplanationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "non-directive" | "nd" => Ok(ExplanationKind::NonDirective),
            "directive-specific" | "specific" | "ds" => Ok(ExplanationKind::DirectiveSpecific),
            "directive-generic" | "generic" | "dg" => Ok(ExplanationKind::DirectiveGeneric),
            other => Err(Error::Parameter(format!("unknown explanation kind `{other}`"))),
        }
    }
}

/// Where the pieces of an explanation came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub grid: String,
    pub catalog: String,
    pub solver: String,
}

/// Decision-boundary facts about one feature, measured by varying it alone
/// at the counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFacts {
    pub spec: FeatureSpec,
    pub current: f64,
    pub target: f64,
    /// Value where the decision flips.
    pub threshold: Option<f64>,
    /// Grid value closest to the threshold that keeps the original decision.
    pub boundary: Option<f64>,
    /// Grid value closest to the threshold on the other side.
    pub limit: Option<f64>,
    /// Grid value farthest from the threshold on the other side.
    pub far: Option<f64>,
}

impl FeatureFacts {
    pub fn relation(&self) -> Option<&'static str> {
        match (self.boundary, self.limit) {
            (Some(b), Some(l)) if l > b => Some("higher than"),
            (Some(_), Some(_)) => Some("lower than"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstAction {
    pub name: String,
    pub class_tag: Option<String>,
}

/// The explanation tuple: instance, counterfactual, plan, model and the
/// original and counterfactual labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectiveExplanation {
    pub schema: FeatureSchema,
    pub x: FeatureVector,
    pub counterfactual: Counterfactual,
    /// Most likely path under the policy; empty without a policy.
    pub plan: Vec<PlanStep>,
    /// Policy action at the initial state.
    pub first_action: Option<FirstAction>,
    pub reachability: Option<f64>,
    pub model_digest: String,
    pub y: Label,
    pub y_prime: Label,
    /// The instance already has the requested decision; the counterfactual
    /// describes the nearest way to lose it.
    pub boundary: bool,
    /// No policy reaches the counterfactual side.
    pub unreachable: bool,
    pub provenance: Provenance,
    pub scenario: Option<String>,
    pub customer: Option<String>,
    pub facts: BTreeMap<String, FeatureFacts>,
}

fn grid_values(spec: &FeatureSpec) -> Vec<f64> {
    match spec.kind {
        FeatureKind::Ordinal => spec.values.clone(),
        FeatureKind::Categorical => Vec::new(),
        FeatureKind::Continuous => {
            let step = spec.step.unwrap_or((spec.hi() - spec.lo()) / DEFAULT_INTERVALS);
            if step > 0.0 {
                stepped(spec.lo(), spec.hi(), step)
            } else {
                vec![spec.lo()]
            }
        }
    }
}

fn facts_for(model: &LinearModel, x: &FeatureVector, c: &FeatureVector, y: Label) -> Result<BTreeMap<String, FeatureFacts>> {
    let schema = model.schema();
    let mut out = BTreeMap::new();
    for (i, spec) in schema.features().iter().enumerate() {
        let mut facts = FeatureFacts {
            spec: spec.clone(),
            current: x.get(i),
            target: c.get(i),
            threshold: None,
            boundary: None,
            limit: None,
            far: None,
        };
        if spec.kind != FeatureKind::Categorical {
            if let Some(t) = model.pdp_threshold(c, i)? {
                facts.threshold = Some(t);
                let mut same: Option<f64> = None;
                let mut other: Option<f64> = None;
                let mut far: Option<f64> = None;
                let closer = |best: Option<f64>, v: f64| match best {
                    Some(b) if (b - t).abs() <= (v - t).abs() => Some(b),
                    _ => Some(v),
                };
                for v in grid_values(spec) {
                    if model.classify(&c.with(i, v))? == y {
                        same = closer(same, v);
                    } else {
                        other = closer(other, v);
                        far = match far {
                            Some(b) if (b - t).abs() >= (v - t).abs() => Some(b),
                            _ => Some(v),
                        };
                    }
                }
                facts.boundary = same;
                facts.limit = other;
                facts.far = far;
            }
        }
        out.insert(spec.name.clone(), facts);
    }
    Ok(out)
}

/// Builds the explanation tuple. `planned` carries the recourse MDP and a
/// policy for it; without one, only non-directive texts can be rendered.
pub fn assemble(
    model: &LinearModel,
    x: &FeatureVector,
    counterfactual: &Counterfactual,
    planned: Option<(&RecourseMdp, &Policy)>,
    desired: Label,
) -> Result<DirectiveExplanation> {
    let schema = model.schema();
    if x.len() != schema.len() || counterfactual.target.len() != schema.len() {
        return Err(Error::Mismatch("instance or counterfactual does not match the model schema".into()));
    }
    schema.validate(x)?;
    schema.validate(&counterfactual.target)?;
    let y = model.classify(x)?;
    let y_prime = model.classify(&counterfactual.target)?;
    if y_prime != counterfactual.label {
        return Err(Error::Mismatch(format!(
            "counterfactual is labelled {} but the model says {}",
            counterfactual.label, y_prime
        )));
    }
    let boundary = y == desired;
    let expected = if boundary { y.flipped() } else { desired };
    if y_prime != expected {
        return Err(Error::Mismatch(format!(
            "counterfactual label {y_prime} does not match the requested outcome {expected}"
        )));
    }

    let mut plan = Vec::new();
    let mut first_action = None;
    let mut reach = None;
    let mut unreachable = true;
    if let Some((r, policy)) = planned {
        if r.schema() != schema {
            return Err(Error::Mismatch("recourse MDP was built for another schema".into()));
        }
        if r.desired() != y_prime {
            return Err(Error::Mismatch("recourse MDP plans toward another label".into()));
        }
        let p = reachability(r.mdp(), policy)?;
        reach = Some(p);
        unreachable = p <= 0.0;
        let s0 = r.mdp().initial();
        if let Some(a) = policy.action(s0) {
            let action = &r.catalog().actions[a];
            first_action = Some(FirstAction {
                name: action.name.clone(),
                class_tag: action.class_tag.clone(),
            });
        }
        plan = r.plan(policy, MAX_PLAN_STEPS);
    }

    Ok(DirectiveExplanation {
        schema: schema.clone(),
        x: x.clone(),
        counterfactual: counterfactual.clone(),
        plan,
        first_action,
        reachability: reach,
        model_digest: model.digest(),
        y,
        y_prime,
        boundary,
        unreachable,
        provenance: Provenance::default(),
        scenario: None,
        customer: None,
        facts: facts_for(model, x, &counterfactual.target, y)?,
    })
}

impl DirectiveExplanation {
    pub fn with_presentation(mut self, scenario: Option<String>, customer: Option<String>) -> Self {
        self.scenario = scenario;
        self.customer = customer;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "x": self.schema.vector_to_json(&self.x),
            "counterfactual": self.counterfactual.to_json(&self.schema),
            "plan": self.plan,
            "first_action": self.first_action,
            "reachability": self.reachability,
            "model": self.model_digest,
            "y": self.y,
            "y_prime": self.y_prime,
            "boundary": self.boundary,
            "unreachable": self.unreachable,
            "provenance": self.provenance,
        })
    }

    fn slot(&self, templates: &TemplateSet, slot: &str, feature: Option<&str>, words: bool) -> Result<String> {
        let missing = || {
            Error::Template(match feature {
                Some(f) => format!("slot `{slot}:{f}` cannot be filled"),
                None => format!("slot `{slot}` cannot be filled"),
            })
        };
        if let Some(f) = feature {
            let facts = self.facts.get(f).ok_or_else(|| Error::Template(format!("unknown feature `{f}`")))?;
            let value = |v: Option<f64>| v.map(|v| format_value(&facts.spec, v, words)).ok_or_else(missing);
            return match slot {
                "name" => Ok(facts.spec.display_name().to_string()),
                "current" => value(Some(facts.current)),
                "target" => value(Some(facts.target)),
                "boundary" => value(facts.boundary),
                "limit" => value(facts.limit),
                "far" => value(facts.far),
                "relation" => facts.relation().map(str::to_string).ok_or_else(missing),
                _ => Err(missing()),
            };
        }
        match slot {
            "customer" => Ok(self.customer.clone().unwrap_or_else(|| "there".into())),
            "decision" => Ok(self.y.decision_word().into()),
            "target_decision" => Ok(self.y_prime.decision_word().into()),
            "outcome" => Ok(outcome_word(self.y_prime).into()),
            "action" => self.first_action.as_ref().map(|a| a.name.clone()).ok_or_else(missing),
            "class" => {
                let a = self.first_action.as_ref().ok_or_else(missing)?;
                match a.class_tag.as_deref().filter(|t| !t.trim().is_empty()) {
                    Some(t) => Ok(t.to_string()),
                    None => Err(Error::Catalog(format!("action `{}` has no class tag", a.name))),
                }
            }
            "changes" | "changes_past" | "basis" => {
                let which = match slot {
                    "changes" => Phrase::Change,
                    "changes_past" => Phrase::Past,
                    _ => Phrase::Basis,
                };
                let parts = self
                    .counterfactual
                    .changed
                    .iter()
                    .map(|f| {
                        let has_boundary = self.facts.get(f).is_some_and(|x| x.relation().is_some());
                        let phrase = templates.feature_phrase(f, which, has_boundary);
                        self.expand(templates, &phrase, false)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if parts.is_empty() {
                    return Err(missing());
                }
                Ok(join_and(&parts))
            }
            _ => Err(missing()),
        }
    }

    fn expand(&self, templates: &TemplateSet, template: &str, composite: bool) -> Result<String> {
        expand(template, &mut |slot, feature, words| {
            if !composite && matches!(slot, "changes" | "changes_past" | "basis") {
                return Err(Error::Template(format!("slot `{slot}` cannot appear inside a feature phrase")));
            }
            self.slot(templates, slot, feature, words)
        })
    }

    fn field(&self, templates: &TemplateSet, field: Field) -> Result<String> {
        let t = templates.resolve(self.scenario.as_deref(), self.boundary, field);
        self.expand(templates, t, true)
    }

    fn require_plan(&self) -> Result<&FirstAction> {
        match &self.first_action {
            Some(a) if !self.unreachable => Ok(a),
            _ => Err(Error::Unreachable(format!(
                "no plan reaches the `{}` decision with the given catalog",
                self.y_prime.decision_word()
            ))),
        }
    }
}

fn join_and(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clauses {
    pub greeting: String,
    pub global: String,
    pub decision: String,
    pub counterfactual: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

/// A rendered explanation. `text` is the counterfactual clause followed by
/// the filler or action clause; the greeting, global and decision clauses
/// form the shared introduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationText {
    pub kind: ExplanationKind,
    pub clauses: Clauses,
    pub text: String,
    pub word_count: usize,
}

pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

impl ExplanationText {
    fn new(kind: ExplanationKind, clauses: Clauses) -> Self {
        let mut e = ExplanationText {
            kind,
            clauses,
            text: String::new(),
            word_count: 0,
        };
        e.refresh();
        e
    }

    pub(crate) fn refresh(&mut self) {
        let tail = self.clauses.filler.as_deref().or(self.clauses.action.as_deref()).unwrap_or("");
        self.text = [self.clauses.counterfactual.as_str(), tail]
            .iter()
            .filter(|s| !s.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" ");
        self.word_count = word_count(&self.text);
    }

    pub fn introduction(&self) -> String {
        [&self.clauses.greeting, &self.clauses.global, &self.clauses.decision]
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Renders one explanation kind. Directive kinds need a policy that reaches
/// the counterfactual side.
pub fn render(de: &DirectiveExplanation, kind: ExplanationKind, templates: &TemplateSet) -> Result<ExplanationText> {
    let (cf_field, tail_field) = match kind {
        ExplanationKind::NonDirective => (Field::NdCounterfactual, Field::Filler),
        ExplanationKind::DirectiveSpecific => (Field::Counterfactual, Field::Specific),
        ExplanationKind::DirectiveGeneric => (Field::GenericCounterfactual, Field::Generic),
    };
    if kind != ExplanationKind::NonDirective {
        de.require_plan()?;
    }
    let tail = de.field(templates, tail_field)?;
    let (filler, action) = match kind {
        ExplanationKind::NonDirective => (Some(tail), None),
        _ => (None, Some(tail)),
    };
    Ok(ExplanationText::new(
        kind,
        Clauses {
            greeting: de.field(templates, Field::Greeting)?,
            global: de.field(templates, Field::Global)?,
            decision: de.field(templates, Field::Decision)?,
            counterfactual: de.field(templates, cf_field)?,
            filler,
            action,
        },
    ))
}

/// Renders all three kinds and balances the non-directive filler against
/// the directive texts.
pub fn render_all(de: &DirectiveExplanation, templates: &TemplateSet) -> Result<Vec<ExplanationText>> {
    let nd = render(de, ExplanationKind::NonDirective, templates)?;
    let ds = render(de, ExplanationKind::DirectiveSpecific, templates)?;
    let dg = render(de, ExplanationKind::DirectiveGeneric, templates)?;
    let elaborations = templates
        .elaborations(de.scenario.as_deref(), de.boundary)
        .iter()
        .map(|e| de.expand(templates, e, true))
        .collect::<Result<Vec<_>>>()?;
    let nd = balance_filler(&nd, &[ds.word_count, dg.word_count], &elaborations);
    Ok(vec![nd, ds, dg])
}

/// The class tag used by generic explanations for `action`.
pub fn class_of(catalog: &crate::planner::ActionCatalog, action: &str) -> Result<String> {
    let a = catalog
        .get(action)
        .ok_or_else(|| Error::Catalog(format!("unknown action `{action}`")))?;
    Ok(generic_class_of(a)?.to_string())
}
