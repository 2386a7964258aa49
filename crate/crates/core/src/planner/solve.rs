use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mdp::{argmax_lowest, Choice, Mdp, Policy};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub policy: Policy,
    /// Max-norm Bellman residual after each sweep.
    pub residuals: Vec<f64>,
}

/// Synchronous value iteration until the max-norm residual drops below
/// `epsilon`. Terminal states keep value 0.
pub fn value_iteration(mdp: &Mdp, epsilon: f64) -> Result<ValueIteration> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon {epsilon} must be > 0")));
    }
    let n = mdp.n_states();
    let mut values = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            next[s] = if mdp.is_terminal(s) {
                0.0
            } else {
                mdp.enabled(s)
                    .filter_map(|a| mdp.q_value(s, a, &values))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            residual = residual.max((next[s] - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        residuals.push(residual);
        if residual < epsilon {
            break;
        }
    }
    Ok(ValueIteration {
        policy: Policy::greedy(mdp, &values),
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearningParams {
    pub episodes: usize,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub max_steps: usize,
}

impl Default for QLearningParams {
    fn default() -> Self {
        QLearningParams {
            episodes: 10_000,
            alpha: 0.1,
            epsilon_start: 1.0,
            epsilon_decay: 0.999,
            epsilon_min: 0.05,
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearning {
    pub policy: Policy,
    /// `q[s][a]`; disabled actions hold negative infinity.
    pub q: Vec<Vec<f64>>,
}

fn sample(t: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(next, p) in t {
        acc += p;
        if u < acc {
            return next;
        }
    }
    t.iter().rev().find(|(_, p)| *p > 0.0).map(|(s, _)| *s).unwrap_or(t[0].0)
}

fn greedy_action(q: &[f64]) -> Option<usize> {
    argmax_lowest(q.iter().copied().enumerate().filter(|(_, v)| v.is_finite())).map(|(a, _)| a)
}

/// Tabular epsilon-greedy Q-learning. Every episode starts at the initial
/// state; the pseudo-random stream is fixed by `seed`.
pub fn q_learning(mdp: &Mdp, params: &QLearningParams, seed: u64) -> Result<QLearning> {
    if params.episodes == 0 {
        return Err(Error::Parameter("episodes must be >= 1".into()));
    }
    if !(params.alpha > 0.0 && params.alpha <= 1.0) {
        return Err(Error::Parameter("alpha must lie in (0, 1]".into()));
    }
    for (name, v) in [
        ("epsilon_start", params.epsilon_start),
        ("epsilon_decay", params.epsilon_decay),
        ("epsilon_min", params.epsilon_min),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Parameter(format!("{name} must lie in [0, 1]")));
        }
    }
    let n = mdp.n_states();
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    if mdp.transitions(s, a).is_some() {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epsilon = params.epsilon_start;
    let mut enabled = Vec::new();
    for _ in 0..params.episodes {
        let mut s = mdp.initial();
        for _ in 0..params.max_steps {
            if mdp.is_terminal(s) {
                break;
            }
            enabled.clear();
            enabled.extend(mdp.enabled(s));
            let explore: f64 = rng.random();
            let a = if explore < epsilon {
                enabled[rng.random_range(0..enabled.len())]
            } else {
                greedy_action(&q[s]).expect("enabled action")
            };
            let t = mdp.transitions(s, a).expect("enabled action");
            let next = sample(t, &mut rng);
            let future = if mdp.is_terminal(next) {
                0.0
            } else {
                q[next].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let target = mdp.reward(a, next) + mdp.discount() * future;
            q[s][a] += params.alpha * (target - q[s][a]);
            s = next;
        }
        epsilon = (epsilon * params.epsilon_decay).max(params.epsilon_min);
    }
    let mut choice = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n);
    for (s, row) in q.iter().enumerate() {
        if mdp.is_terminal(s) {
            choice.push(Choice::Terminal);
            value.push(0.0);
        } else {
            let a = greedy_action(row).expect("enabled action");
            choice.push(Choice::Action(a));
            value.push(row[a]);
        }
    }
    Ok(QLearning {
        policy: Policy { choice, value },
        q,
    })
}

/// A planning algorithm selectable by name.
pub trait PolicySolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, mdp: &Mdp, seed: u64) -> Result<Policy>;
}

#[derive(Debug, Clone)]
pub struct ValueIterationSolver {
    pub epsilon: f64,
}

impl PolicySolver for ValueIterationSolver {
    fn name(&self) -> &str {
        "value-iteration"
    }

    fn solve(&self, mdp: &Mdp, _seed: u64) -> Result<Policy> {
        Ok(value_iteration(mdp, self.epsilon)?.policy)
    }
}

#[derive(Debug, Clone)]
pub struct QLearningSolver {
    pub params: QLearningParams,
}

impl PolicySolver for QLearningSolver {
    fn name(&self) -> &str {
        "q-learning"
    }

    fn solve(&self, mdp: &Mdp, seed: u64) -> Result<Policy> {
        Ok(q_learning(mdp, &self.params, seed)?.policy)
    }
}

/// Solvers keyed by name, with aliases.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    entries: Vec<(String, Arc<dyn PolicySolver>)>,
}

impl std::fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.iter().map(|(n, _)| n)).finish()
    }
}

impl SolverRegistry {
    pub fn new() -> Self {
        SolverRegistry::default()
    }

    /// `vi`/`value-iteration` and `q`/`q-learning`.
    pub fn with_defaults(epsilon: f64, params: QLearningParams) -> Self {
        let mut r = SolverRegistry::new();
        let vi: Arc<dyn PolicySolver> = Arc::new(ValueIterationSolver { epsilon });
        let q: Arc<dyn PolicySolver> = Arc::new(QLearningSolver { params });
        r.register("vi", vi.clone());
        r.register("value-iteration", vi);
        r.register("q", q.clone());
        r.register("q-learning", q);
        r
    }

    pub fn register(&mut self, name: &str, solver: Arc<dyn PolicySolver>) {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), solver));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PolicySolver>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }
}
