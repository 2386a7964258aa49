use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::counterfactual::DEFAULT_INTERVALS;
use crate::error::{Error, Result};
use crate::model::{Label, LinearModel};
use crate::schema::{all_hold, FeatureKind, FeatureSchema, FeatureVector, Mutability};

use super::catalog::{Action, ActionCatalog};
use super::mdp::{Choice, Mdp, Policy};

/// Per-feature bin centers. Bin edges are the midpoints between adjacent
/// centers; the outer bins extend to the feature bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    centers: Vec<Vec<f64>>,
}

impl Binning {
    pub fn new(schema: &FeatureSchema, centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.len() != schema.len() {
            return Err(Error::Binning(format!(
                "{} center lists for {} features",
                centers.len(),
                schema.len()
            )));
        }
        for (f, c) in schema.features().iter().zip(&centers) {
            if c.is_empty() {
                return Err(Error::Binning(format!("`{}` has no bins", f.name)));
            }
            if c.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Binning(format!("`{}` centers must be strictly increasing", f.name)));
            }
            if c.iter().any(|v| !v.is_finite() || *v < f.lo() || *v > f.hi()) {
                return Err(Error::Binning(format!("`{}` has a center outside its bounds", f.name)));
            }
        }
        Ok(Binning { centers })
    }

    /// Bins anchored at `x`: continuous features get centers `x_i + k·step`
    /// inside the bounds (step from `steps`, else the schema, else 1/100 of
    /// the range); ordinal and categorical features use their value sets;
    /// immutable features keep a single bin at `x_i`.
    pub fn anchored(schema: &FeatureSchema, x: &FeatureVector, steps: &BTreeMap<String, f64>) -> Result<Self> {
        schema.validate(x)?;
        for (name, step) in steps {
            schema.index_of(name)?;
            if !(step.is_finite() && *step > 0.0) {
                return Err(Error::Binning(format!("step for `{name}` must be > 0")));
            }
        }
        let centers = schema
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let xi = x.get(i);
                if f.mutability == Mutability::Immutable {
                    return vec![xi];
                }
                match f.kind {
                    FeatureKind::Ordinal => f.values.clone(),
                    FeatureKind::Categorical => (0..f.categories.len()).map(|c| c as f64).collect(),
                    FeatureKind::Continuous => {
                        let step = steps
                            .get(&f.name)
                            .copied()
                            .or(f.step)
                            .unwrap_or((f.hi() - f.lo()) / DEFAULT_INTERVALS);
                        if !(step > 0.0) {
                            return vec![xi];
                        }
                        let below = ((xi - f.lo()) / step + 1e-9).floor() as i64;
                        let above = ((f.hi() - xi) / step + 1e-9).floor() as i64;
                        (-below..=above)
                            .map(|k| xi + k as f64 * step)
                            .filter(|v| *v >= f.lo() && *v <= f.hi())
                            .collect()
                    }
                }
            })
            .collect();
        Binning::new(schema, centers)
    }

    pub fn centers(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    /// Bin whose center is nearest to `v`; a value exactly between two
    /// centers goes to the upper bin.
    pub fn bin(&self, i: usize, v: f64) -> usize {
        let c = &self.centers[i];
        let k = c.partition_point(|&m| m < v);
        if k == 0 {
            0
        } else if k == c.len() {
            c.len() - 1
        } else if v - c[k - 1] < c[k] - v {
            k - 1
        } else {
            k
        }
    }

    pub fn center(&self, i: usize, b: usize) -> f64 {
        self.centers[i][b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdpParams {
    pub discount: f64,
    /// Reward on entering a goal state; defaults to 10 times the largest
    /// action cost.
    pub goal_bonus: Option<f64>,
    pub state_cap: usize,
}

pub const DEFAULT_DISCOUNT: f64 = 0.95;
pub const DEFAULT_STATE_CAP: usize = 100_000;

impl Default for MdpParams {
    fn default() -> Self {
        MdpParams {
            discount: DEFAULT_DISCOUNT,
            goal_bonus: None,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl MdpParams {
    pub fn bonus_for(&self, catalog: &ActionCatalog) -> f64 {
        self.goal_bonus.unwrap_or_else(|| {
            let max = catalog.actions.iter().map(|a| a.cost).fold(0.0, f64::max);
            if max > 0.0 {
                10.0 * max
            } else {
                10.0
            }
        })
    }
}

/// The recourse MDP over binned feature vectors.
#[derive(Debug, Clone)]
pub struct RecourseMdp {
    mdp: Mdp,
    schema: FeatureSchema,
    catalog: ActionCatalog,
    binning: Binning,
    states: Vec<Vec<usize>>,
    desired: Label,
}

/// One step of the most likely path under a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_tag: Option<String>,
    pub cost: f64,
    /// Probability of the followed outcome.
    pub probability: f64,
    pub state: String,
    pub goal: bool,
}

fn key_of(binning: &Binning, v: &FeatureVector) -> Vec<usize> {
    (0..v.len()).map(|i| binning.bin(i, v.get(i))).collect()
}

/// Successor distribution of `action` from representative `r`, or `None`
/// when the action is disabled there.
fn successors(
    schema: &FeatureSchema,
    binning: &Binning,
    action: &Action,
    r: &FeatureVector,
) -> Result<Option<Vec<(Vec<usize>, f64)>>> {
    if !all_hold(&action.preconditions, schema, r)? {
        return Ok(None);
    }
    for name in action.touched() {
        let i = schema.index_of(name)?;
        if !schema.is_actionable_for(i, r)? {
            return Ok(None);
        }
    }
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    for o in &action.outcomes {
        let mut v = r.clone();
        for e in &o.effects {
            let i = schema.index_of(&e.feature)?;
            v.set(i, v.get(i) + e.delta);
        }
        for e in &o.effects {
            let f = schema.feature(schema.index_of(&e.feature)?);
            let val = v.get(schema.index_of(&e.feature)?);
            let slack = 1e-9 * (f.hi() - f.lo()).max(1.0);
            if val < f.lo() - slack || val > f.hi() + slack {
                return Ok(None);
            }
        }
        if o.probability == 0.0 {
            continue;
        }
        let key = key_of(binning, &v);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, p)) => *p += o.probability,
            None => out.push((key, o.probability)),
        }
    }
    Ok(Some(out))
}

/// Builds the reachable closure from the bin of `x` under the catalog's
/// actions. Goal states (representative classified as `desired`) are not
/// expanded.
pub fn build_recourse_mdp(
    model: &LinearModel,
    catalog: &ActionCatalog,
    x: &FeatureVector,
    desired: Label,
    binning: &Binning,
    params: &MdpParams,
) -> Result<RecourseMdp> {
    let schema = model.schema();
    schema.validate(x)?;
    catalog.validate(schema)?;
    if params.state_cap == 0 {
        return Err(Error::Parameter("state cap must be >= 1".into()));
    }
    let representative = |key: &[usize]| {
        FeatureVector::new(key.iter().enumerate().map(|(i, &b)| binning.center(i, b)).collect())
    };

    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut states: Vec<Vec<usize>> = Vec::new();
    let mut goal: Vec<bool> = Vec::new();
    let mut rows: Vec<Vec<Option<Vec<(usize, f64)>>>> = Vec::new();
    let mut queue = VecDeque::new();

    let start = key_of(binning, x);
    index.insert(start.clone(), 0);
    states.push(start);
    queue.push_back(0);
    while let Some(s) = queue.pop_front() {
        let r = representative(&states[s]);
        let is_goal = model.classify_unchecked(&r) == desired;
        let mut row = vec![None; catalog.len()];
        if !is_goal {
            for (a, action) in catalog.actions.iter().enumerate() {
                let Some(succ) = successors(schema, binning, action, &r)? else {
                    continue;
                };
                let mut t = Vec::with_capacity(succ.len());
                for (key, p) in succ {
                    let next = match index.get(&key) {
                        Some(&n) => n,
                        None => {
                            if states.len() >= params.state_cap {
                                return Err(Error::StateCap {
                                    cap: params.state_cap,
                                    reachable: states.len() + 1,
                                });
                            }
                            let n = states.len();
                            index.insert(key.clone(), n);
                            states.push(key);
                            queue.push_back(n);
                            n
                        }
                    };
                    t.push((next, p));
                }
                row[a] = Some(t);
            }
        }
        // states are dequeued in index order
        debug_assert_eq!(rows.len(), s);
        rows.push(row);
        goal.push(is_goal);
    }
    if !goal[0] && rows[0].iter().all(Option::is_none) {
        return Err(Error::NoEnabledActions);
    }
    let costs = catalog.actions.iter().map(|a| a.cost).collect();
    let mdp = Mdp::new(costs, rows, goal, 0, params.discount, params.bonus_for(catalog))?;
    Ok(RecourseMdp {
        mdp,
        schema: schema.clone(),
        catalog: catalog.clone(),
        binning: binning.clone(),
        states,
        desired,
    })
}

impl RecourseMdp {
    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn catalog(&self) -> &ActionCatalog {
        &self.catalog
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn desired(&self) -> Label {
        self.desired
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn bins(&self, s: usize) -> &[usize] {
        &self.states[s]
    }

    pub fn representative(&self, s: usize) -> FeatureVector {
        FeatureVector::new(
            self.states[s]
                .iter()
                .enumerate()
                .map(|(i, &b)| self.binning.center(i, b))
                .collect(),
        )
    }

    /// Readable key listing the mutable features of a state.
    pub fn state_key(&self, s: usize) -> String {
        let values = self.schema.vector_to_json(&self.representative(s));
        self.schema
            .features()
            .iter()
            .filter(|f| f.mutability != Mutability::Immutable)
            .map(|f| {
                let v = &values[&f.name];
                match v {
                    Value::String(s) => format!("{}={s}", f.name),
                    other => format!("{}={other}", f.name),
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// `{state-key: {action, value}}` for every state.
    pub fn policy_json(&self, policy: &Policy) -> Value {
        let mut out = Map::new();
        for s in 0..self.n_states() {
            let action = match policy.choice.get(s) {
                Some(Choice::Action(a)) => Value::from(self.catalog.actions[*a].name.clone()),
                _ => Value::Null,
            };
            out.insert(
                self.state_key(s),
                json!({
                    "action": action,
                    "value": policy.value.get(s).copied().unwrap_or(0.0),
                    "goal": self.mdp.is_goal(s),
                    "dead_end": self.mdp.is_dead_end(s),
                }),
            );
        }
        Value::Object(out)
    }

    /// The most likely path from the initial state: follow the policy and,
    /// at each step, the most probable outcome (earliest on ties). Stops at
    /// a terminal state, a revisited state, or after `max_steps`.
    pub fn plan(&self, policy: &Policy, max_steps: usize) -> Vec<PlanStep> {
        let mut steps = Vec::new();
        let mut s = self.mdp.initial();
        let mut seen = vec![false; self.n_states()];
        while steps.len() < max_steps && !self.mdp.is_terminal(s) && !seen[s] {
            seen[s] = true;
            let Some(a) = policy.action(s) else { break };
            let Some(t) = self.mdp.transitions(s, a) else { break };
            let (next, p) = t
                .iter()
                .copied()
                .fold(None, |best: Option<(usize, f64)>, (n, p)| match best {
                    Some((_, bp)) if bp >= p => best,
                    _ => Some((n, p)),
                })
                .expect("nonempty transition row");
            let action = &self.catalog.actions[a];
            steps.push(PlanStep {
                action: action.name.clone(),
                class_tag: action.class_tag.clone(),
                cost: action.cost,
                probability: p,
                state: self.state_key(next),
                goal: self.mdp.is_goal(next),
            });
            s = next;
        }
        steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::catalog::{Effect, Outcome};
    use crate::planner::solve::value_iteration;
    use crate::schema::FeatureSpec;

    fn debt_model() -> LinearModel {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("dti", 0.0, 100.0).with_step(1.0),
            FeatureSpec::continuous("age", 18.0, 99.0).with_mutability(Mutability::Immutable),
        ])
        .unwrap();
        // approve iff dti <= 33
        LinearModel::from_scalars(schema, &[-1.0, 0.0], 33.0, 0.5).unwrap()
    }

    #[test]
    fn binning_snaps_to_nearest_center() {
        let m = debt_model();
        let x = FeatureVector::new(vec![52.0, 40.0]);
        let b = Binning::anchored(m.schema(), &x, &BTreeMap::new()).unwrap();
        assert_eq!(b.centers(0).len(), 101);
        assert_eq!(b.center(0, b.bin(0, 32.4)), 32.0);
        assert_eq!(b.center(0, b.bin(0, 32.5)), 33.0);
        assert_eq!(b.centers(1), &[40.0]);
    }

    #[test]
    fn pay_off_car_loan_reaches_goal() {
        let m = debt_model();
        let x = FeatureVector::new(vec![52.0, 40.0]);
        let cat = ActionCatalog::new(vec![crate::planner::Action::deterministic(
            "pay off your car loan",
            "reduce your total debt",
            1.0,
            &[("dti", -20.0)],
        )])
        .unwrap();
        let b = Binning::anchored(m.schema(), &x, &BTreeMap::new()).unwrap();
        let r = build_recourse_mdp(&m, &cat, &x, Label::Positive, &b, &MdpParams::default()).unwrap();
        assert_eq!(r.n_states(), 2);
        assert!(r.mdp().is_goal(1) && !r.mdp().is_goal(0));
        let vi = value_iteration(r.mdp(), 1e-9).unwrap();
        let plan = r.plan(&vi.policy, 10);
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].action, "pay off your car loan");
        assert!(plan[0].goal);
        assert_eq!(r.state_key(1), "dti=32");
    }

    #[test]
    fn stochastic_outcomes_are_kept() {
        let m = debt_model();
        let x = FeatureVector::new(vec![52.0, 40.0]);
        let action = Action {
            name: "refinance".into(),
            class_tag: Some("reduce your total debt".into()),
            cost: 1.0,
            outcomes: vec![
                Outcome {
                    probability: 0.7,
                    effects: vec![Effect {
                        feature: "dti".into(),
                        delta: -30.0,
                    }],
                },
                Outcome {
                    probability: 0.3,
                    effects: vec![Effect {
                        feature: "dti".into(),
                        delta: -10.0,
                    }],
                },
            ],
            preconditions: vec![],
        };
        let cat = ActionCatalog::new(vec![action]).unwrap();
        let b = Binning::anchored(m.schema(), &x, &BTreeMap::new()).unwrap();
        let r = build_recourse_mdp(&m, &cat, &x, Label::Positive, &b, &MdpParams::default()).unwrap();
        let t = r.mdp().transitions(0, 0).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].1, 0.7);
        assert_eq!(t[1].1, 0.3);
        assert_eq!(r.representative(t[0].0).get(0), 22.0);
        assert_eq!(r.representative(t[1].0).get(0), 42.0);
    }

    #[test]
    fn already_desired_is_single_goal_state() {
        let m = debt_model();
        let x = FeatureVector::new(vec![20.0, 40.0]);
        let cat = ActionCatalog::new(vec![Action::deterministic("a", "t", 1.0, &[("dti", 1.0)])]).unwrap();
        let b = Binning::anchored(m.schema(), &x, &BTreeMap::new()).unwrap();
        let r = build_recourse_mdp(&m, &cat, &x, Label::Positive, &b, &MdpParams::default()).unwrap();
        assert_eq!(r.n_states(), 1);
        assert!(r.mdp().is_goal(0));
    }

    #[test]
    fn cap_and_disabled_errors() {
        let m = debt_model();
        let x = FeatureVector::new(vec![99.0, 40.0]);
        let b = Binning::anchored(m.schema(), &x, &BTreeMap::new()).unwrap();
        let slow = ActionCatalog::new(vec![Action::deterministic("a", "t", 1.0, &[("dti", -1.0)])]).unwrap();
        let params = MdpParams {
            state_cap: 10,
            ..MdpParams::default()
        };
        match build_recourse_mdp(&m, &slow, &x, Label::Positive, &b, &params) {
            Err(Error::StateCap { cap, reachable }) => {
                assert_eq!(cap, 10);
                assert_eq!(reachable, 11);
            }
            other => panic!("{other:?}"),
        }
        let up = ActionCatalog::new(vec![Action::deterministic("a", "t", 1.0, &[("dti", 5.0)])]).unwrap();
        assert!(matches!(
            build_recourse_mdp(&m, &up, &x, Label::Positive, &b, &MdpParams::default()),
            Err(Error::NoEnabledActions)
        ));
        let empty = ActionCatalog::default();
        assert!(matches!(
            build_recourse_mdp(&m, &empty, &x, Label::Positive, &b, &MdpParams::default()),
            Err(Error::NoEnabledActions)
        ));
    }
}
