use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mdp::{reachable_under, Mdp, Policy};

/// Convergence tolerance for the fixed-point solves.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Absorption below `1 - ABSORPTION_SLACK` makes the expected cost unbounded.
pub const ABSORPTION_SLACK: f64 = 1e-9;
const MAX_SWEEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub cost: f64,
    pub reached_goal: bool,
    pub dead_end: bool,
}

impl Trajectory {
    pub fn states(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.next).collect()
    }
}

fn draw(t: &[(usize, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    for &(next, p) in t {
        acc += p;
        if u < acc {
            return next;
        }
    }
    t.iter().rev().find(|(_, p)| *p > 0.0).map(|(s, _)| *s).unwrap_or(t[0].0)
}

/// Follows `policy` from the initial state, sampling outcomes from a
/// seeded stream.
pub fn simulate_policy(mdp: &Mdp, policy: &Policy, seed: u64, max_steps: usize) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rollout(mdp, policy, &mut rng, max_steps)
}

pub fn rollout(mdp: &Mdp, policy: &Policy, rng: &mut ChaCha8Rng, max_steps: usize) -> Result<Trajectory> {
    let mut s = mdp.initial();
    let mut steps = Vec::new();
    let mut cost = 0.0;
    while steps.len() < max_steps && !mdp.is_terminal(s) {
        let a = policy.action(s).ok_or(Error::PolicyUndefined(s))?;
        let t = mdp.transitions(s, a).ok_or(Error::PolicyUndefined(s))?;
        let next = draw(t, rng.random());
        cost += mdp.cost(a);
        steps.push(Step { state: s, action: a, next });
        s = next;
    }
    Ok(Trajectory {
        steps,
        cost,
        reached_goal: mdp.is_goal(s),
        dead_end: mdp.is_dead_end(s),
    })
}

/// Least fixed point of `h = base + P_pi h` on `states`, with `h` pinned on
/// absorbing states.
fn absorption(mdp: &Mdp, policy: &Policy, states: &[usize], absorbing: impl Fn(usize) -> Option<f64>) -> Vec<f64> {
    let mut h = vec![0.0; mdp.n_states()];
    for &s in states {
        if let Some(v) = absorbing(s) {
            h[s] = v;
        }
    }
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for &s in states {
            if absorbing(s).is_some() {
                continue;
            }
            let Some(t) = policy.action(s).and_then(|a| mdp.transitions(s, a)) else {
                continue;
            };
            let v: f64 = t.iter().map(|&(next, p)| p * h[next]).sum();
            change = change.max((v - h[s]).abs());
            h[s] = v;
        }
        if change < FIXED_POINT_TOLERANCE {
            break;
        }
    }
    h
}

fn defined(mdp: &Mdp, policy: &Policy) -> Result<Vec<usize>> {
    policy.check(mdp)?;
    Ok(reachable_under(mdp, policy))
}

/// Probability of eventually entering a goal state from the initial state.
pub fn reachability(mdp: &Mdp, policy: &Policy) -> Result<f64> {
    let states = defined(mdp, policy)?;
    let h = absorption(mdp, policy, &states, |s| {
        if mdp.is_goal(s) {
            Some(1.0)
        } else if mdp.is_dead_end(s) {
            Some(0.0)
        } else {
            None
        }
    });
    Ok(h[mdp.initial()].clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum PolicyCost {
    Finite(f64),
    Unbounded,
}

impl PolicyCost {
    pub fn finite(self) -> Option<f64> {
        match self {
            PolicyCost::Finite(c) => Some(c),
            PolicyCost::Unbounded => None,
        }
    }
}

/// Expected undiscounted action cost until absorption in a goal or dead
/// end. Unbounded when the chain can cycle forever with positive
/// probability.
pub fn policy_cost(mdp: &Mdp, policy: &Policy) -> Result<PolicyCost> {
    let states = defined(mdp, policy)?;
    let absorbed = absorption(mdp, policy, &states, |s| mdp.is_terminal(s).then_some(1.0));
    if absorbed[mdp.initial()] < 1.0 - ABSORPTION_SLACK {
        return Ok(PolicyCost::Unbounded);
    }
    let mut c = vec![0.0; mdp.n_states()];
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for &s in &states {
            if mdp.is_terminal(s) {
                continue;
            }
            let a = policy.action(s).ok_or(Error::PolicyUndefined(s))?;
            let t = mdp.transitions(s, a).ok_or(Error::PolicyUndefined(s))?;
            let v = mdp.cost(a) + t.iter().map(|&(next, p)| p * c[next]).sum::<f64>();
            change = change.max((v - c[s]).abs() / v.abs().max(1.0));
            c[s] = v;
        }
        if change < FIXED_POINT_TOLERANCE {
            break;
        }
    }
    Ok(PolicyCost::Finite(c[mdp.initial()]))
}
