use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::catalog::PROBABILITY_TOLERANCE;

/// Tabular goal-directed MDP. Goal states are absorbing and carry no
/// actions; a non-goal state without enabled actions is a dead end.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    costs: Vec<f64>,
    /// `transitions[s][a]`: `None` when `a` is disabled in `s`.
    transitions: Vec<Vec<Option<Vec<(usize, f64)>>>>,
    goal: Vec<bool>,
    initial: usize,
    discount: f64,
    goal_bonus: f64,
}

impl Mdp {
    pub fn new(
        costs: Vec<f64>,
        transitions: Vec<Vec<Option<Vec<(usize, f64)>>>>,
        goal: Vec<bool>,
        initial: usize,
        discount: f64,
        goal_bonus: f64,
    ) -> Result<Self> {
        let n = transitions.len();
        if n == 0 || goal.len() != n {
            return Err(Error::Parameter(format!("{n} transition rows for {} goal flags", goal.len())));
        }
        if initial >= n {
            return Err(Error::Parameter(format!("initial state {initial} out of range")));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::Parameter(format!("discount {discount} must lie in (0, 1)")));
        }
        if !(goal_bonus.is_finite() && goal_bonus >= 0.0) {
            return Err(Error::Parameter("goal bonus must be finite and >= 0".into()));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::Parameter(format!("action cost {c} must be finite and >= 0")));
        }
        let mut transitions = transitions;
        for (s, row) in transitions.iter_mut().enumerate() {
            if row.len() != costs.len() {
                return Err(Error::Parameter(format!(
                    "state {s} has {} action entries for {} actions",
                    row.len(),
                    costs.len()
                )));
            }
            if goal[s] {
                row.iter_mut().for_each(|t| *t = None);
                continue;
            }
            for (a, t) in row.iter().enumerate() {
                let Some(t) = t else { continue };
                let mut total = 0.0;
                for &(next, p) in t {
                    if next >= n || !(p.is_finite() && p >= 0.0) {
                        return Err(Error::Parameter(format!("bad transition ({s}, {a}) -> ({next}, {p})")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return Err(Error::Parameter(format!(
                        "transition row ({s}, {a}) sums to {total}"
                    )));
                }
            }
        }
        Ok(Mdp {
            costs,
            transitions,
            goal,
            initial,
            discount,
            goal_bonus,
        })
    }

    pub fn n_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn n_actions(&self) -> usize {
        self.costs.len()
    }

    pub fn cost(&self, a: usize) -> f64 {
        self.costs[a]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn goal_bonus(&self) -> f64 {
        self.goal_bonus
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal[s]
    }

    pub fn transitions(&self, s: usize, a: usize) -> Option<&[(usize, f64)]> {
        self.transitions[s][a].as_deref()
    }

    pub fn enabled(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions[s]
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(a, _)| a)
    }

    pub fn is_dead_end(&self, s: usize) -> bool {
        !self.goal[s] && self.transitions[s].iter().all(Option::is_none)
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.goal[s] || self.is_dead_end(s)
    }

    pub fn reward(&self, a: usize, next: usize) -> f64 {
        let bonus = if self.goal[next] { self.goal_bonus } else { 0.0 };
        bonus - self.costs[a]
    }

    /// Expected one-step return of `a` in `s` given successor values.
    pub fn q_value(&self, s: usize, a: usize, values: &[f64]) -> Option<f64> {
        let t = self.transitions(s, a)?;
        Some(
            t.iter()
                .map(|&(next, p)| p * (self.reward(a, next) + self.discount * values[next]))
                .sum(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Choice {
    Action(usize),
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub choice: Vec<Choice>,
    pub value: Vec<f64>,
}

/// Relative slack under which two action values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Index of the best value; near-ties go to the lowest index.
pub fn argmax_lowest(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let items: Vec<(usize, f64)> = values.collect();
    let best = items.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    if items.is_empty() {
        return None;
    }
    let slack = TIE_TOLERANCE * best.abs().max(1.0);
    items.into_iter().find(|&(_, v)| v >= best - slack)
}

impl Policy {
    /// Greedy policy with respect to `values`.
    pub fn greedy(mdp: &Mdp, values: &[f64]) -> Policy {
        let mut choice = Vec::with_capacity(mdp.n_states());
        let mut value = Vec::with_capacity(mdp.n_states());
        for s in 0..mdp.n_states() {
            if mdp.is_terminal(s) {
                choice.push(Choice::Terminal);
                value.push(0.0);
                continue;
            }
            let (a, v) = argmax_lowest(mdp.enabled(s).map(|a| (a, mdp.q_value(s, a, values).unwrap_or(f64::NEG_INFINITY))))
                .expect("non-terminal state has an enabled action");
            choice.push(Choice::Action(a));
            value.push(v);
        }
        Policy { choice, value }
    }

    pub fn action(&self, s: usize) -> Option<usize> {
        match self.choice.get(s) {
            Some(Choice::Action(a)) => Some(*a),
            _ => None,
        }
    }

    /// Checks that the policy chooses an enabled action wherever the MDP is
    /// not terminal, for every state reachable from the initial state.
    pub fn check(&self, mdp: &Mdp) -> Result<()> {
        if self.choice.len() != mdp.n_states() {
            return Err(Error::Mismatch(format!(
                "policy covers {} states, MDP has {}",
                self.choice.len(),
                mdp.n_states()
            )));
        }
        for s in reachable_under(mdp, self) {
            if mdp.is_terminal(s) {
                continue;
            }
            match self.choice[s] {
                Choice::Action(a) if mdp.transitions(s, a).is_some() => {}
                _ => return Err(Error::PolicyUndefined(s)),
            }
        }
        Ok(())
    }
}

/// States reachable from the initial state when following `policy`.
/// Traversal stops at states where the policy is undefined.
pub fn reachable_under(mdp: &Mdp, policy: &Policy) -> Vec<usize> {
    let mut seen = vec![false; mdp.n_states()];
    let mut stack = vec![mdp.initial()];
    let mut out = Vec::new();
    seen[mdp.initial()] = true;
    while let Some(s) = stack.pop() {
        out.push(s);
        let Some(t) = policy.action(s).and_then(|a| mdp.transitions(s, a)) else {
            continue;
        };
        for &(next, p) in t {
            if p > 0.0 && !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    out.sort_unstable();
    out
}
