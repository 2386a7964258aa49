//! Nearest and diverse counterfactuals over a value grid, and minimum-cost
//! flipsets over an action grid.

mod grid;
mod search;

use std::collections::HashSet;

use serde_json::{json, Map, Value};

pub use grid::{stepped, ActionGrid, ActionGridEntry, SearchGrid, DEFAULT_INTERVALS};

use crate::error::{Error, Result};
use crate::mad::MadWeights;
use crate::model::{Label, LinearModel};
use crate::schema::{all_hold, number, FeatureKind, FeatureSchema, FeatureVector, Mutability};
use search::{Choice, Column, Problem};

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub target: FeatureVector,
    pub distance: f64,
    /// Changed feature names in schema order.
    pub changed: Vec<String>,
    pub label: Label,
}

impl Counterfactual {
    pub fn to_json(&self, schema: &FeatureSchema) -> Value {
        json!({
            "target": schema.vector_to_json(&self.target),
            "distance": self.distance,
            "changed": self.changed,
            "label": self.label,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipSet {
    /// `(feature, delta)` in schema order; zero deltas are omitted.
    pub deltas: Vec<(String, f64)>,
    pub total_cost: f64,
    pub target: FeatureVector,
    pub label: Label,
}

impl FlipSet {
    pub fn to_json(&self, schema: &FeatureSchema) -> Value {
        let deltas: Map<String, Value> = self.deltas.iter().map(|(n, d)| (n.clone(), number(*d))).collect();
        json!({
            "deltas": deltas,
            "total_cost": self.total_cost,
            "target": schema.vector_to_json(&self.target),
            "label": self.label,
        })
    }
}

fn term(kind: FeatureKind, w: f64, a: f64, b: f64) -> f64 {
    match kind {
        FeatureKind::Categorical => {
            if a == b {
                0.0
            } else {
                w
            }
        }
        _ => w * (a - b).abs(),
    }
}

fn distance_unchecked(schema: &FeatureSchema, x: &FeatureVector, c: &FeatureVector, weights: &MadWeights) -> f64 {
    schema
        .features()
        .iter()
        .enumerate()
        .filter(|(i, _)| !weights.is_excluded(*i))
        .map(|(i, f)| term(f.kind, weights.weight(i), x.get(i), c.get(i)))
        .sum()
}

/// Inverse-MAD weighted Manhattan distance. Categorical features count a
/// mismatch as one unit of their weight.
pub fn weighted_distance(
    schema: &FeatureSchema,
    x: &FeatureVector,
    c: &FeatureVector,
    weights: &MadWeights,
) -> Result<f64> {
    schema.validate(x)?;
    schema.validate(c)?;
    if weights.len() != schema.len() {
        return Err(Error::Mismatch(format!(
            "{} weights for {} features",
            weights.len(),
            schema.len()
        )));
    }
    Ok(distance_unchecked(schema, x, c, weights))
}

fn names(schema: &FeatureSchema, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| schema.feature(i).name.clone()).collect()
}

fn check_inputs(model: &LinearModel, x: &FeatureVector) -> Result<()> {
    let schema = model.schema();
    schema.validate(x)?;
    if !schema.has_mutable() {
        return Err(Error::NoRecourse);
    }
    Ok(())
}

fn trivial(x: &FeatureVector, label: Label) -> Counterfactual {
    Counterfactual {
        target: x.clone(),
        distance: 0.0,
        changed: Vec::new(),
        label,
    }
}

fn grid_columns(
    model: &LinearModel,
    x: &FeatureVector,
    grid: &SearchGrid,
    weights: &MadWeights,
) -> Result<Vec<Column>> {
    let schema = model.schema();
    let mut columns = Vec::new();
    for (i, f) in schema.features().iter().enumerate() {
        let Some(values) = grid.values(i) else { continue };
        if weights.is_excluded(i) || !schema.is_actionable_for(i, x)? {
            continue;
        }
        let xi = x.get(i);
        let base = model.contribution(i, xi);
        let mut choices = vec![Choice {
            value: xi,
            cost: 0.0,
            shift: 0.0,
        }];
        choices.extend(
            values
                .iter()
                .filter(|&&v| v != xi && f.direction.allows(xi, v) && f.in_domain(v))
                .map(|&v| Choice {
                    value: v,
                    cost: term(f.kind, weights.weight(i), xi, v),
                    shift: model.contribution(i, v) - base,
                }),
        );
        choices[1..].sort_by(|a, b| a.cost.total_cmp(&b.cost));
        if choices.len() > 1 {
            columns.push(Column { feature: i, choices });
        }
    }
    Ok(columns)
}

fn search_grid(
    model: &LinearModel,
    x: &FeatureVector,
    desired: Label,
    grid: &SearchGrid,
    weights: &MadWeights,
    forbidden: &[Vec<usize>],
) -> Result<Option<Counterfactual>> {
    let schema = model.schema();
    let columns = grid_columns(model, x, grid, weights)?;
    let cost_of = |c: &FeatureVector| distance_unchecked(schema, x, c, weights);
    let problem = Problem {
        model,
        x,
        desired,
        columns,
        forbidden,
        budget: f64::INFINITY,
        cost_of: &cost_of,
    };
    Ok(problem.solve().map(|s| Counterfactual {
        changed: names(schema, &s.changed),
        target: s.state,
        distance: s.cost,
        label: desired,
    }))
}

fn check_grid(model: &LinearModel, grid: &SearchGrid, weights: &MadWeights) -> Result<()> {
    let n = model.schema().len();
    if grid.len() != n || weights.len() != n {
        return Err(Error::Mismatch(format!(
            "schema has {n} features, grid {} and weights {}",
            grid.len(),
            weights.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(())
}

/// Grid point closest to `x` (weighted distance) that the model assigns
/// `desired`, changing only features actionable for `x`. Equal distances
/// prefer fewer changes, then earlier features in schema order.
pub fn nearest_counterfactual(
    model: &LinearModel,
    x: &FeatureVector,
    desired: Label,
    grid: &SearchGrid,
    weights: &MadWeights,
) -> Result<Option<Counterfactual>> {
    check_inputs(model, x)?;
    check_grid(model, grid, weights)?;
    if model.classify_unchecked(x) == desired {
        return Ok(Some(trivial(x, desired)));
    }
    search_grid(model, x, desired, grid, weights, &[])
}

/// Up to `k` counterfactuals with pairwise distinct changed-feature sets,
/// sorted by distance.
pub fn diverse_counterfactuals(
    model: &LinearModel,
    x: &FeatureVector,
    desired: Label,
    grid: &SearchGrid,
    weights: &MadWeights,
    k: usize,
) -> Result<Vec<Counterfactual>> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    check_inputs(model, x)?;
    check_grid(model, grid, weights)?;
    if model.classify_unchecked(x) == desired {
        return Ok(vec![trivial(x, desired)]);
    }
    let schema = model.schema();
    let mut forbidden: Vec<Vec<usize>> = Vec::new();
    let mut out = Vec::new();
    while out.len() < k {
        match search_grid(model, x, desired, grid, weights, &forbidden)? {
            Some(cf) => {
                forbidden.push(x.diff(&cf.target));
                out.push(cf);
            }
            None => break,
        }
    }
    debug_assert!(out.iter().all(|c| schema.validate(&c.target).is_ok()));
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(out)
}

/// Validates an action grid against the schema and returns, per usable
/// entry, the feature index.
pub fn validate_action_grid(schema: &FeatureSchema, grid: &ActionGrid) -> Result<Vec<usize>> {
    if grid.entries.is_empty() {
        return Err(Error::EmptyActionGrid);
    }
    let mut seen = HashSet::new();
    let mut idx = Vec::with_capacity(grid.entries.len());
    for e in &grid.entries {
        let i = schema.index_of(&e.feature)?;
        let f = schema.feature(i);
        if !seen.insert(i) {
            return Err(Error::ActionGrid(format!("duplicate entry for `{}`", e.feature)));
        }
        if f.mutability == Mutability::Immutable {
            return Err(Error::ActionGrid(format!("`{}` is immutable", e.feature)));
        }
        if !(e.unit_cost.is_finite() && e.unit_cost >= 0.0) {
            return Err(Error::ActionGrid(format!(
                "`{}`: unit cost must be finite and non-negative",
                e.feature
            )));
        }
        if let Some(d) = e.deltas.iter().find(|d| !d.is_finite() || !f.direction.allows(0.0, **d)) {
            return Err(Error::ActionGrid(format!(
                "`{}`: delta {d} violates its {:?} direction",
                e.feature, f.direction
            )));
        }
        for c in &e.condition {
            schema.index_of(&c.feature)?;
        }
        idx.push(i);
    }
    Ok(idx)
}

/// Cheapest combination of per-feature deltas (at most one per feature)
/// moving `x` to `desired`, with total cost at most `budget`. Equal costs
/// prefer fewer touched features, then earlier features in schema order.
pub fn min_cost_flipset(
    model: &LinearModel,
    x: &FeatureVector,
    desired: Label,
    grid: &ActionGrid,
    budget: f64,
) -> Result<Option<FlipSet>> {
    let schema = model.schema();
    check_inputs(model, x)?;
    let idx = validate_action_grid(schema, grid)?;
    if budget.is_nan() || budget < 0.0 {
        return Err(Error::Parameter("budget must be non-negative".into()));
    }
    if model.classify_unchecked(x) == desired {
        return Ok(Some(FlipSet {
            deltas: Vec::new(),
            total_cost: 0.0,
            target: x.clone(),
            label: desired,
        }));
    }

    let mut unit = vec![0.0; schema.len()];
    let mut columns = Vec::new();
    let mut order: Vec<(usize, &ActionGridEntry)> = idx.into_iter().zip(&grid.entries).collect();
    order.sort_by_key(|(i, _)| *i);
    for (i, e) in order {
        if !schema.is_actionable_for(i, x)? || !all_hold(&e.condition, schema, x)? {
            continue;
        }
        let f = schema.feature(i);
        let xi = x.get(i);
        let base = model.contribution(i, xi);
        unit[i] = e.unit_cost;
        let mut choices = vec![Choice {
            value: xi,
            cost: 0.0,
            shift: 0.0,
        }];
        let mut values = HashSet::new();
        for &d in &e.deltas {
            let v = xi + d;
            if d == 0.0 || !f.in_domain(v) || !values.insert(v.to_bits()) {
                continue;
            }
            choices.push(Choice {
                value: v,
                cost: e.unit_cost * (v - xi).abs(),
                shift: model.contribution(i, v) - base,
            });
        }
        choices[1..].sort_by(|a, b| a.cost.total_cmp(&b.cost));
        if choices.len() > 1 {
            columns.push(Column { feature: i, choices });
        }
    }

    let cost_of = |c: &FeatureVector| {
        (0..schema.len())
            .map(|i| unit[i] * (c.get(i) - x.get(i)).abs())
            .sum::<f64>()
    };
    let problem = Problem {
        model,
        x,
        desired,
        columns,
        forbidden: &[],
        budget,
        cost_of: &cost_of,
    };
    Ok(problem.solve().map(|s| FlipSet {
        deltas: s
            .changed
            .iter()
            .map(|&i| (schema.feature(i).name.clone(), s.state.get(i) - x.get(i)))
            .collect(),
        total_cost: s.cost,
        target: s.state,
        label: desired,
    }))
}
