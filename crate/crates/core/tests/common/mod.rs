#![allow(dead_code)]

pub mod mdps;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse_core::counterfactual::{ActionGrid, ActionGridEntry};
use recourse_core::schema::{Clause, Comparison, Direction};
use recourse_core::{FeatureKind, FeatureSchema, FeatureSpec, FeatureVector, Label, LinearModel, MadWeights, Mutability, SearchGrid, Weight};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/lending-demo")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// A random instance for the counterfactual searches.
pub struct Instance {
    pub model: LinearModel,
    pub x: FeatureVector,
    pub desired: Label,
    pub grid: SearchGrid,
    pub weights: MadWeights,
    pub actions: ActionGrid,
}

pub struct Shape {
    pub features: std::ops::RangeInclusive<usize>,
    pub max_mutable: usize,
    pub grid_points: usize,
}

pub const SMALL: Shape = Shape {
    features: 2..=5,
    max_mutable: 3,
    grid_points: 7,
};

pub fn random_instance(rng: &mut ChaCha8Rng, shape: &Shape) -> Instance {
    let n = rng.random_range(shape.features.clone());
    let mut specs = Vec::new();
    let mut mutable = 0;
    for i in 0..n {
        let name = format!("f{i}");
        let roll: f64 = rng.random();
        let mut spec = if roll < 0.6 {
            FeatureSpec::continuous(&name, 0.0, 10.0)
        } else if roll < 0.85 {
            FeatureSpec::ordinal(&name, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        } else {
            FeatureSpec::categorical(&name, &["p", "q", "r"])
        };
        let m: f64 = rng.random();
        let mutability = if mutable >= shape.max_mutable || m < 0.25 {
            Mutability::Immutable
        } else if m < 0.4 {
            Mutability::ConditionallyMutable
        } else {
            Mutability::Actionable
        };
        if mutability != Mutability::Immutable {
            mutable += 1;
        }
        spec = spec.with_mutability(mutability);
        if mutability == Mutability::ConditionallyMutable {
            spec.condition = vec![Clause {
                feature: "f0".into(),
                op: if rng.random_bool(0.5) { Comparison::Gt } else { Comparison::Le },
                value: rng.random_range(0.0..4.0f64).round(),
            }];
        }
        if spec.kind != FeatureKind::Categorical {
            let d: f64 = rng.random();
            spec = spec.with_direction(if d < 0.6 {
                Direction::Free
            } else if d < 0.8 {
                Direction::IncreaseOnly
            } else {
                Direction::DecreaseOnly
            });
        }
        specs.push(spec);
    }
    if mutable == 0 {
        specs[n - 1].mutability = Mutability::Actionable;
        specs[n - 1].condition.clear();
    }
    let schema = FeatureSchema::new(specs).unwrap();

    let x = FeatureVector::new(
        schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Continuous => round2(rng.random_range(0.0..10.0)),
                FeatureKind::Ordinal => f.values[rng.random_range(0..f.values.len())],
                FeatureKind::Categorical => rng.random_range(0..3) as f64,
            })
            .collect(),
    );

    let weights: Vec<Weight> = schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Categorical => Weight::Categorical((0..3).map(|_| round2(rng.random_range(-2.0..2.0))).collect()),
            _ => Weight::Scalar(round2(rng.random_range(-2.0..2.0))),
        })
        .collect();
    let threshold = [0.5, 0.3, 0.7][rng.random_range(0..3)];
    let probe = LinearModel::new(schema.clone(), weights.clone(), 0.0, threshold).unwrap();
    let z0 = probe.logit(&x).unwrap();
    let t = (threshold / (1.0 - threshold)).ln();
    // place x on a random side of the boundary by up to 4 logits
    let offset = rng.random_range(-4.0..4.0f64);
    let bias = round2(t - z0 + offset);
    let model = LinearModel::new(schema.clone(), weights, bias, threshold).unwrap();
    let desired = model.classify(&x).unwrap().flipped();

    let grid_values = schema
        .features()
        .iter()
        .map(|f| {
            if rng.random_bool(0.1) {
                return None;
            }
            let k = rng.random_range(1..=shape.grid_points);
            Some(match f.kind {
                FeatureKind::Continuous => (0..k).map(|_| round2(rng.random_range(0.0..10.0))).collect(),
                FeatureKind::Ordinal => (0..k).map(|_| f.values[rng.random_range(0..f.values.len())]).collect(),
                FeatureKind::Categorical => (0..k.min(3)).map(|_| rng.random_range(0..3) as f64).collect(),
            })
        })
        .collect();
    let grid = SearchGrid::new(&schema, grid_values).unwrap();

    let mad: Vec<f64> = (0..n).map(|_| round2(rng.random_range(0.1..2.0))).collect();
    let excluded: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
    let weights = MadWeights::new(mad, excluded).unwrap();

    let mut entries = Vec::new();
    for f in schema.features() {
        if f.mutability == Mutability::Immutable || f.kind == FeatureKind::Categorical || !rng.random_bool(0.85) {
            continue;
        }
        let k = rng.random_range(1..=4);
        let mut deltas = Vec::new();
        for _ in 0..k {
            let mag = rng.random_range(1..=5) as f64;
            deltas.push(match f.direction {
                Direction::IncreaseOnly => mag,
                Direction::DecreaseOnly => -mag,
                Direction::Free if rng.random_bool(0.5) => mag,
                Direction::Free => -mag,
            });
        }
        entries.push(ActionGridEntry {
            feature: f.name.clone(),
            deltas,
            unit_cost: round2(rng.random_range(0.1..3.0)),
            condition: Vec::new(),
        });
    }
    let actions = ActionGrid::new(entries);

    Instance {
        model,
        x,
        desired,
        grid,
        weights,
        actions,
    }
}

/// Straight-line distance written independently of the library.
pub fn oracle_distance(schema: &FeatureSchema, x: &FeatureVector, c: &FeatureVector, w: &MadWeights) -> f64 {
    let mut total = 0.0;
    for i in 0..schema.len() {
        if w.is_excluded(i) {
            continue;
        }
        let a = x.values()[i];
        let b = c.values()[i];
        if schema.feature(i).kind == FeatureKind::Categorical {
            if a != b {
                total += w.weights()[i];
            }
        } else {
            total += w.weights()[i] * (a - b).abs();
        }
    }
    total
}

pub fn oracle_label(model: &LinearModel, v: &FeatureVector) -> Label {
    let mut z = model.bias();
    for (i, w) in model.weights().iter().enumerate() {
        z += match w {
            Weight::Scalar(c) => c * v.values()[i],
            Weight::Categorical(cs) => cs[v.values()[i] as usize],
        };
    }
    let p = (1.0 / (1.0 + (-z).exp())).clamp(1e-12, 1.0 - 1e-12);
    if p >= model.threshold() {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn condition_holds(schema: &FeatureSchema, clauses: &[Clause], x: &FeatureVector) -> bool {
    clauses.iter().all(|c| {
        let v = x.values()[schema.index_of(&c.feature).unwrap()];
        match c.op {
            Comparison::Lt => v < c.value,
            Comparison::Le => v <= c.value,
            Comparison::Gt => v > c.value,
            Comparison::Ge => v >= c.value,
            Comparison::Eq => v == c.value,
            Comparison::Ne => v != c.value,
        }
    })
}

fn may_change(schema: &FeatureSchema, i: usize, x: &FeatureVector) -> bool {
    let f = schema.feature(i);
    match f.mutability {
        Mutability::Immutable => false,
        Mutability::Actionable => true,
        Mutability::ConditionallyMutable => condition_holds(schema, &f.condition, x),
    }
}

fn direction_ok(d: Direction, from: f64, to: f64) -> bool {
    match d {
        Direction::Free => true,
        Direction::IncreaseOnly => to >= from,
        Direction::DecreaseOnly => to <= from,
    }
}

fn product(options: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::new();
        for prefix in &out {
            for &v in opts {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Brute-force minimum distance over the full grid product.
pub fn oracle_nearest(inst: &Instance) -> Option<f64> {
    let schema = inst.model.schema();
    let options: Vec<Vec<f64>> = (0..schema.len())
        .map(|i| {
            let xi = inst.x.values()[i];
            let mut opts = vec![xi];
            if may_change(schema, i, &inst.x) && !inst.weights.is_excluded(i) {
                if let Some(vals) = inst.grid.values(i) {
                    opts.extend(vals.iter().copied().filter(|&v| direction_ok(schema.feature(i).direction, xi, v)));
                }
            }
            opts
        })
        .collect();
    product(&options)
        .into_iter()
        .map(FeatureVector::new)
        .filter(|c| oracle_label(&inst.model, c) == inst.desired)
        .map(|c| oracle_distance(schema, &inst.x, &c, &inst.weights))
        .min_by(|a, b| a.total_cmp(b))
}

/// Brute-force minimum flipset cost over every delta combination.
pub fn oracle_flipset(inst: &Instance, budget: f64) -> Option<f64> {
    let schema = inst.model.schema();
    let mut options: Vec<Vec<f64>> = (0..schema.len()).map(|_| vec![0.0]).collect();
    let mut unit = vec![0.0; schema.len()];
    for e in &inst.actions.entries {
        let i = schema.index_of(&e.feature).unwrap();
        if !may_change(schema, i, &inst.x) {
            continue;
        }
        unit[i] = e.unit_cost;
        let f = schema.feature(i);
        for &d in &e.deltas {
            let v = inst.x.values()[i] + d;
            if f.in_domain(v) {
                options[i].push(d);
            }
        }
    }
    product(&options)
        .into_iter()
        .filter_map(|deltas| {
            let c = FeatureVector::new(inst.x.values().iter().zip(&deltas).map(|(a, d)| a + d).collect());
            if oracle_label(&inst.model, &c) != inst.desired {
                return None;
            }
            let cost: f64 = deltas.iter().zip(&unit).map(|(d, u)| u * d.abs()).sum();
            (cost <= budget).then_some(cost)
        })
        .min_by(|a, b| a.total_cmp(b))
}

pub fn immutables_unchanged(schema: &FeatureSchema, x: &FeatureVector, c: &FeatureVector) -> bool {
    (0..schema.len()).all(|i| schema.feature(i).mutability != Mutability::Immutable || x.values()[i] == c.values()[i])
}
