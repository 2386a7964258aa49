mod common;

use common::*;
use proptest::prelude::*;
use recourse_core::counterfactual::{min_cost_flipset, ActionGrid, ActionGridEntry};
use recourse_core::schema::Direction;
use recourse_core::{
    diverse_counterfactuals, nearest_counterfactual, weighted_distance, Dataset, FeatureSchema, FeatureSpec,
    FeatureVector, Label, LinearModel, MadWeights, Mutability, Profile, SearchGrid,
};

fn lending() -> (LinearModel, FeatureVector) {
    let model = LinearModel::load(fixtures().join("model.json")).unwrap();
    let x = Profile::load(fixtures().join("scenarios/03/profile.json"))
        .unwrap()
        .vector(model.schema())
        .unwrap();
    (model, x)
}

#[test]
fn scenario_three_income_grid_gives_first_point_past_boundary() {
    let (model, x) = lending();
    let schema = model.schema();
    let grid = SearchGrid::from_schema(schema)
        .restricted_to(schema, &["income".to_string()])
        .unwrap();
    let data = Dataset::load_csv(schema, fixtures().join("dataset.csv")).unwrap();
    let w = MadWeights::from_dataset(schema, &data).unwrap();
    let cf = nearest_counterfactual(&model, &x, Label::Positive, &grid, &w).unwrap().unwrap();
    let i = schema.index_of("income").unwrap();
    assert_eq!(cf.target.get(i), 43000.0);
    assert_eq!(cf.changed, vec!["income".to_string()]);
    assert_eq!(model.classify(&cf.target).unwrap(), Label::Positive);
}

#[test]
fn diverse_single_feature_flips_are_disjoint() {
    // either feature alone reaching 5 flips: a + b >= 5 from (0, 0) with a,b <= 5
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("a", 0.0, 5.0).with_step(1.0),
        FeatureSpec::continuous("b", 0.0, 5.0).with_step(1.0),
    ])
    .unwrap();
    let model = LinearModel::from_scalars(schema.clone(), &[1.0, 1.0], -5.0, 0.5).unwrap();
    let x = FeatureVector::new(vec![0.0, 0.0]);
    let grid = SearchGrid::from_schema(&schema);
    let w = MadWeights::new(vec![1.0, 1.5], vec![false, false]).unwrap();
    let out = diverse_counterfactuals(&model, &x, Label::Positive, &grid, &w, 2).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].changed, vec!["a"]);
    assert_eq!(out[1].changed, vec!["a", "b"]);
    // enumeration: a alone costs 5; b alone costs 7.5; mixed (4,1) costs 5.5
    assert_eq!(out[1].distance, 5.5);

    let k1 = diverse_counterfactuals(&model, &x, Label::Positive, &grid, &w, 1).unwrap();
    let nearest = nearest_counterfactual(&model, &x, Label::Positive, &grid, &w).unwrap().unwrap();
    assert_eq!(k1, vec![nearest]);
}

#[test]
fn diverse_with_one_mutable_feature_is_exhausted() {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("a", 0.0, 5.0).with_step(1.0),
        FeatureSpec::continuous("b", 0.0, 5.0).with_mutability(Mutability::Immutable),
    ])
    .unwrap();
    let model = LinearModel::from_scalars(schema.clone(), &[1.0, 1.0], -5.0, 0.5).unwrap();
    let x = FeatureVector::new(vec![0.0, 0.0]);
    let out = diverse_counterfactuals(
        &model,
        &x,
        Label::Positive,
        &SearchGrid::from_schema(&schema),
        &MadWeights::uniform(2),
        3,
    )
    .unwrap();
    assert_eq!(out.len(), 1);
}

#[test]
fn flipset_matches_four_cubed_enumeration() {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("a", -20.0, 20.0),
        FeatureSpec::continuous("b", -20.0, 20.0),
        FeatureSpec::continuous("c", -20.0, 20.0).with_direction(Direction::IncreaseOnly),
    ])
    .unwrap();
    let model = LinearModel::from_scalars(schema.clone(), &[0.7, -1.3, 0.4], -6.0, 0.5).unwrap();
    let x = FeatureVector::new(vec![0.0, 0.0, 0.0]);
    let entry = |f: &str, deltas: [f64; 3], unit_cost: f64| ActionGridEntry {
        feature: f.into(),
        deltas: deltas.to_vec(),
        unit_cost,
        condition: vec![],
    };
    let grid = ActionGrid::new(vec![
        entry("a", [2.0, 4.0, 8.0], 1.0),
        entry("b", [-1.0, -3.0, 2.0], 1.7),
        entry("c", [3.0, 6.0, 9.0], 0.6),
    ]);
    let fs = min_cost_flipset(&model, &x, Label::Positive, &grid, f64::INFINITY)
        .unwrap()
        .unwrap();
    // all 4^3 combinations, including the zero delta
    let opts: [[f64; 4]; 3] = [[0.0, 2.0, 4.0, 8.0], [0.0, -1.0, -3.0, 2.0], [0.0, 3.0, 6.0, 9.0]];
    let cost = [1.0, 1.7, 0.6];
    let mut best = f64::INFINITY;
    for &a in &opts[0] {
        for &b in &opts[1] {
            for &c in &opts[2] {
                let z = -6.0 + 0.7 * a - 1.3 * b + 0.4 * c;
                if z >= 0.0 {
                    best = best.min(cost[0] * a.abs() + cost[1] * b.abs() + cost[2] * c.abs());
                }
            }
        }
    }
    assert!((fs.total_cost - best).abs() < 1e-9, "{} vs {best}", fs.total_cost);
    assert_eq!(model.classify(&fs.target).unwrap(), Label::Positive);
}

#[test]
fn random_instances_match_brute_force() {
    let mut rng = rng(7);
    for case in 0..200 {
        let inst = random_instance(&mut rng, &SMALL);
        let schema = inst.model.schema();
        let got = nearest_counterfactual(&inst.model, &inst.x, inst.desired, &inst.grid, &inst.weights);
        let got = match got {
            Err(recourse_core::Error::EmptyGrid) => continue,
            other => other.unwrap(),
        };
        let want = oracle_nearest(&inst);
        match (&got, want) {
            (Some(cf), Some(d)) => {
                assert!((cf.distance - d).abs() <= 1e-9, "case {case}: {} vs {d}", cf.distance);
                assert_eq!(inst.model.classify(&cf.target).unwrap(), inst.desired, "case {case}");
                assert!(immutables_unchanged(schema, &inst.x, &cf.target));
            }
            (None, None) => {}
            _ => panic!("case {case}: got {got:?}, oracle {want:?}"),
        }
    }
}

#[test]
fn refining_the_grid_never_increases_distance() {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("a", 0.0, 10.0),
        FeatureSpec::continuous("b", 0.0, 10.0),
    ])
    .unwrap();
    let model = LinearModel::from_scalars(schema.clone(), &[0.9, 0.4], -6.3, 0.5).unwrap();
    let x = FeatureVector::new(vec![1.0, 2.0]);
    let w = MadWeights::uniform(2);
    let mut last = f64::INFINITY;
    for step in [4.0, 2.0, 1.0, 0.5, 0.25] {
        let grid = SearchGrid::from_schema(&schema)
            .with_step(&schema, "a", step)
            .unwrap()
            .with_step(&schema, "b", step)
            .unwrap();
        let d = nearest_counterfactual(&model, &x, Label::Positive, &grid, &w)
            .unwrap()
            .unwrap()
            .distance;
        assert!(d <= last + 1e-12, "step {step}: {d} > {last}");
        last = d;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_matches_straight_line(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &SMALL);
        let schema = inst.model.schema();
        let other = random_instance(&mut rng(seed ^ 0x5eed), &SMALL);
        // reuse x's schema: draw c by perturbing x with the other instance's values where compatible
        let c = FeatureVector::new(
            inst.x
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let f = schema.feature(i);
                    let alt = other.x.values().get(i).copied().unwrap_or(v);
                    if f.in_domain(alt) { alt } else { v }
                })
                .collect(),
        );
        let got = weighted_distance(schema, &inst.x, &c, &inst.weights).unwrap();
        let want = oracle_distance(schema, &inst.x, &c, &inst.weights);
        prop_assert!((got - want).abs() <= 1e-12);
        prop_assert_eq!(weighted_distance(schema, &inst.x, &inst.x, &inst.weights).unwrap(), 0.0);
    }

    #[test]
    fn flipsets_match_brute_force(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &SMALL);
        prop_assume!(!inst.actions.entries.is_empty());
        let budget = if seed % 3 == 0 { 4.0 } else { f64::INFINITY };
        let got = min_cost_flipset(&inst.model, &inst.x, inst.desired, &inst.actions, budget).unwrap();
        let want = oracle_flipset(&inst, budget);
        match (&got, want) {
            (Some(fs), Some(c)) => {
                prop_assert!((fs.total_cost - c).abs() <= 1e-9, "{} vs {}", fs.total_cost, c);
                prop_assert_eq!(inst.model.classify(&fs.target).unwrap(), inst.desired);
                prop_assert!(immutables_unchanged(inst.model.schema(), &inst.x, &fs.target));
            }
            (None, None) => {}
            _ => prop_assert!(false, "got {:?}, oracle {:?}", got, want),
        }
    }

    #[test]
    fn diverse_sets_are_distinct_and_sorted(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &SMALL);
        let out = match diverse_counterfactuals(&inst.model, &inst.x, inst.desired, &inst.grid, &inst.weights, 4) {
            Err(recourse_core::Error::EmptyGrid) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(out.len() <= 4);
        for (i, a) in out.iter().enumerate() {
            prop_assert_eq!(inst.model.classify(&a.target).unwrap(), inst.desired);
            for b in &out[i + 1..] {
                prop_assert!(a.changed != b.changed);
                prop_assert!(a.distance <= b.distance);
            }
        }
    }
}
