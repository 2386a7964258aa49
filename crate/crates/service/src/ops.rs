//! Operations shared by the CLI and the HTTP API. Each returns the JSON
//! body published in [`crate::shapes`].

use std::collections::BTreeMap;

use recourse_core::counterfactual::{ActionGrid, SearchGrid};
use recourse_core::explainer::ExplanationKind;
use recourse_core::planner::PolicyCost;
use recourse_core::{diverse_counterfactuals, min_cost_flipset, Engine, Error, FeatureVector, Label, Profile, Result};
use serde_json::{json, Value};

pub const DEFAULT_PDP_POINTS: usize = 101;
pub const DEFAULT_FLIPSET_STEPS: usize = 10;

pub fn predict(engine: &Engine, x: &FeatureVector) -> Result<Value> {
    let model = engine.model();
    let label = model.classify(x)?;
    Ok(json!({
        "label": label,
        "decision": label.decision_word(),
        "probability": model.predict_proba(x)?,
        "logit": model.logit(x)?,
        "model": model.digest(),
    }))
}

pub fn pdp(engine: &Engine, x: &FeatureVector, feature: &str, points: usize) -> Result<Value> {
    let model = engine.model();
    let i = model.schema().index_of(feature)?;
    let curve = model
        .pdp_curve(x, i, points)?
        .into_iter()
        .map(|(v, p)| {
            let label = model.classify(&x.with(i, v))?;
            Ok(json!({"value": v, "probability": p, "label": label}))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "feature": feature,
        "threshold": model.pdp_threshold(x, i)?,
        "current": x.get(i),
        "curve": curve,
    }))
}

pub fn counterfactuals(
    engine: &Engine,
    profile: &Profile,
    desired: Label,
    k: usize,
    steps: &BTreeMap<String, f64>,
) -> Result<Value> {
    let model = engine.model();
    let schema = model.schema();
    let x = profile.vector(schema)?;
    let mut grid = SearchGrid::from_schema(schema);
    for (name, step) in engine.config().grid_steps.iter().chain(steps) {
        grid = grid.with_step(schema, name, *step)?;
    }
    if !profile.focus.is_empty() {
        grid = grid.restricted_to(schema, &profile.focus)?;
    }
    let found = diverse_counterfactuals(model, &x, desired, &grid, engine.weights(), k)?;
    Ok(json!({
        "desired": desired,
        "counterfactuals": found.iter().map(|c| c.to_json(schema)).collect::<Vec<_>>(),
    }))
}

pub fn flipset(
    engine: &Engine,
    x: &FeatureVector,
    desired: Label,
    budget: f64,
    grid: Option<&ActionGrid>,
    max_steps: usize,
) -> Result<Value> {
    let model = engine.model();
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = ActionGrid::from_schema(model.schema(), max_steps);
            &default_grid
        }
    };
    let found = min_cost_flipset(model, x, desired, grid, budget)?;
    Ok(json!({
        "desired": desired,
        "flipset": found.map(|f| f.to_json(model.schema())),
    }))
}

pub fn plan(engine: &Engine, x: &FeatureVector, desired: Label, solver: Option<&str>, seed: Option<u64>) -> Result<Value> {
    let target = engine.target_for(x, desired)?;
    let p = engine.plan(x, target, solver, seed)?;
    let steps = p.recourse.plan(&p.policy, recourse_core::explainer::MAX_PLAN_STEPS);
    let cost = match p.cost {
        PolicyCost::Finite(c) => json!(c),
        PolicyCost::Unbounded => Value::Null,
    };
    Ok(json!({
        "target": target,
        "solver": p.solver,
        "seed": p.seed,
        "states": p.recourse.n_states(),
        "reachability": p.reachability,
        "expected_cost": cost,
        "plan": steps,
    }))
}

pub fn explain(
    engine: &Engine,
    profile: &Profile,
    desired: Label,
    kind: Option<ExplanationKind>,
    solver: Option<&str>,
    seed: Option<u64>,
) -> Result<Value> {
    let de = engine.explain(profile, desired, solver, seed)?;
    let texts = engine.render(&de, kind)?;
    let introduction = texts.first().map(|t| t.introduction()).unwrap_or_default();
    Ok(json!({
        "introduction": introduction,
        "texts": texts,
        "explanation": de.to_json(),
    }))
}

/// Parses `feature=step` pairs.
pub fn parse_steps(pairs: &[String]) -> Result<BTreeMap<String, f64>> {
    pairs
        .iter()
        .map(|p| {
            let (name, step) = p
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("grid step `{p}` is not feature=step")))?;
            let step: f64 = step
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("grid step `{p}` is not a number")))?;
            Ok((name.trim().to_string(), step))
        })
        .collect()
}
