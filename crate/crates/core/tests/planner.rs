mod common;

use std::collections::BTreeMap;

use common::mdps::*;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse_core::planner::{
    build_recourse_mdp, policy_cost, q_learning, reachability, rollout, value_iteration, Action, ActionCatalog,
    Binning, Choice, Mdp, MdpParams, Policy, QLearningParams,
};
use recourse_core::{Label, LinearModel, Mutability, Profile};

#[test]
fn value_iteration_matches_expectimax() {
    let mut rng = rng(11);
    for case in 0..10 {
        let discount = 0.3 + 0.2 * (case as f64 / 10.0);
        let mdp = random_mdp(&mut rng, 20, 3, false, discount, 10.0);
        let vi = value_iteration(&mdp, 1e-9).unwrap();
        let oracle = expectimax_values(&mdp, 50);
        for s in 0..mdp.n_states() {
            assert!(
                (vi.policy.value[s] - oracle[s]).abs() < 1e-6,
                "case {case} state {s}: {} vs {}",
                vi.policy.value[s],
                oracle[s]
            );
        }
    }
}

#[test]
fn greedy_consistency_and_scale_invariance() {
    let mut rng = rng(12);
    for _ in 0..10 {
        let mdp = random_mdp(&mut rng, 15, 3, false, 0.9, 10.0);
        let vi = value_iteration(&mdp, 1e-10).unwrap();
        assert!(vi.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let again = Policy::greedy(&mdp, &vi.policy.value);
        assert_eq!(again.choice, vi.policy.choice);

        let scaled = Mdp::new(
            mdp.costs().iter().map(|c| c * 3.0).collect(),
            (0..mdp.n_states())
                .map(|s| (0..mdp.n_actions()).map(|a| mdp.transitions(s, a).map(<[_]>::to_vec)).collect())
                .collect(),
            (0..mdp.n_states()).map(|s| mdp.is_goal(s)).collect(),
            mdp.initial(),
            mdp.discount(),
            mdp.goal_bonus() * 3.0,
        )
        .unwrap();
        let vs = value_iteration(&scaled, 1e-10).unwrap();
        assert_eq!(vs.policy.choice, vi.policy.choice);
    }
}

#[test]
fn deterministic_policies_follow_cheapest_paths() {
    let mut rng = rng(13);
    for case in 0..20 {
        let mdp = random_mdp(&mut rng, 25, 3, true, 0.99999, 1000.0);
        let vi = value_iteration(&mdp, 1e-6).unwrap();
        let (cost, path) = policy_path(&mdp, &vi.policy).expect("policy reaches a goal");
        let (best, unique, best_path) = uniform_cost_search(&mdp).unwrap();
        assert_eq!(cost, best, "case {case}");
        if unique {
            assert_eq!(path, best_path, "case {case}");
        }
    }
}

#[test]
fn q_learning_agrees_on_benchmark_ladder() {
    let mut rng = rng(14);
    let mdp = q_benchmark(&mut rng);
    let vi = value_iteration(&mdp, 1e-9).unwrap();
    let ql = q_learning(&mdp, &QLearningParams::default(), 42).unwrap();
    for s in trajectory_states(&mdp, &vi.policy) {
        assert_eq!(ql.policy.choice[s], vi.policy.choice[s], "state {s}");
    }
    let again = q_learning(&mdp, &QLearningParams::default(), 42).unwrap();
    assert_eq!(
        ql.q.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>(),
        again.q.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn rollouts_agree_with_exact_quantities() {
    let mut rng = rng(15);
    let mdp = layered_stochastic(&mut rng, 10);
    let vi = value_iteration(&mdp, 1e-9).unwrap();
    let p = reachability(&mdp, &vi.policy).unwrap();
    let c = policy_cost(&mdp, &vi.policy).unwrap().finite().unwrap();
    let mut sim = ChaCha8Rng::seed_from_u64(99);
    let (mut hits, mut total) = (0usize, 0.0);
    for _ in 0..10_000 {
        let t = rollout(&mdp, &vi.policy, &mut sim, 10_000).unwrap();
        hits += t.reached_goal as usize;
        total += t.cost;
    }
    assert!((hits as f64 / 1e4 - p).abs() <= 0.02, "{hits} vs {p}");
    assert!((total / 1e4 - c).abs() <= 0.05 * c, "{} vs {c}", total / 1e4);
}

fn lending() -> (LinearModel, recourse_core::FeatureVector) {
    let model = LinearModel::load(fixtures().join("model.json")).unwrap();
    let x = Profile::load(fixtures().join("scenarios/03/profile.json"))
        .unwrap()
        .vector(model.schema())
        .unwrap();
    (model, x)
}

#[test]
fn lending_transitions_never_move_immutable_bins() {
    let (model, x) = lending();
    let catalog = ActionCatalog::new(vec![
        Action::deterministic("get a second job", "increase your income", 3.0, &[("income", 5000.0)]),
        Action::deterministic("pay down debt", "reduce your total debt", 2.0, &[("dti", -5.0)]),
    ])
    .unwrap();
    let b = Binning::anchored(model.schema(), &x, &BTreeMap::new()).unwrap();
    let r = build_recourse_mdp(&model, &catalog, &x, Label::Positive, &b, &MdpParams::default()).unwrap();
    let schema = model.schema();
    for s in 0..r.n_states() {
        for a in 0..r.mdp().n_actions() {
            let Some(t) = r.mdp().transitions(s, a) else { continue };
            for &(next, _) in t {
                for (i, f) in schema.features().iter().enumerate() {
                    if f.mutability == Mutability::Immutable {
                        assert_eq!(r.bins(s)[i], r.bins(next)[i]);
                    }
                }
            }
        }
    }
    let vi = value_iteration(r.mdp(), 1e-6).unwrap();
    assert!((reachability(r.mdp(), &vi.policy).unwrap() - 1.0).abs() < 1e-9);
    let plan = r.plan(&vi.policy, 20);
    assert!(plan.last().unwrap().goal);
    assert!(matches!(vi.policy.choice[r.mdp().initial()], Choice::Action(_)));
}
