use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use recourse_core::planner::{Choice, Mdp, Policy};

/// Random MDP over `n` states with goals among the last states. With
/// `deterministic`, every enabled action has a single successor and every
/// non-goal state can reach a goal.
pub fn random_mdp(rng: &mut ChaCha8Rng, n: usize, n_actions: usize, deterministic: bool, discount: f64, bonus: f64) -> Mdp {
    let goals = rng.random_range(1..=3.min(n - 1));
    let goal: Vec<bool> = (0..n).map(|s| s >= n - goals).collect();
    let costs: Vec<f64> = (0..n_actions)
        .map(|_| if deterministic { rng.random_range(1..=5) as f64 } else { rng.random_range(0.5..5.0f64) })
        .collect();
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let mut row: Vec<Option<Vec<(usize, f64)>>> = vec![None; n_actions];
        if goal[s] {
            rows.push(row);
            continue;
        }
        for slot in row.iter_mut() {
            if !rng.random_bool(0.75) {
                continue;
            }
            if deterministic {
                *slot = Some(vec![(rng.random_range(0..n), 1.0)]);
            } else {
                let k = rng.random_range(1..=3);
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut t: Vec<(usize, f64)> = Vec::new();
                let mut acc = 0.0;
                for (j, r) in raw.iter().enumerate() {
                    let p = if j + 1 == k { 1.0 - acc } else { r / total };
                    acc += p;
                    t.push((rng.random_range(0..n), p));
                }
                *slot = Some(t);
            }
        }
        if deterministic {
            // guaranteed progress: one action moves to a strictly later state
            let a = rng.random_range(0..n_actions);
            row[a] = Some(vec![(rng.random_range(s + 1..n), 1.0)]);
        }
        rows.push(row);
    }
    Mdp::new(costs, rows, goal, 0, discount, bonus).unwrap()
}

/// Finite-horizon expectimax by memoized recursion.
pub fn expectimax(mdp: &Mdp, s: usize, depth: usize, memo: &mut Vec<Vec<Option<f64>>>) -> f64 {
    if depth == 0 || mdp.is_terminal(s) {
        return 0.0;
    }
    if let Some(v) = memo[depth][s] {
        return v;
    }
    let mut best = f64::NEG_INFINITY;
    for a in 0..mdp.n_actions() {
        let Some(t) = mdp.transitions(s, a) else { continue };
        let t = t.to_vec();
        let mut v = 0.0;
        for (next, p) in t {
            let bonus = if mdp.is_goal(next) { mdp.goal_bonus() } else { 0.0 };
            v += p * (bonus - mdp.cost(a) + mdp.discount() * expectimax(mdp, next, depth - 1, memo));
        }
        best = best.max(v);
    }
    memo[depth][s] = Some(best);
    best
}

pub fn expectimax_values(mdp: &Mdp, depth: usize) -> Vec<f64> {
    let mut memo = vec![vec![None; mdp.n_states()]; depth + 1];
    (0..mdp.n_states()).map(|s| expectimax(mdp, s, depth, &mut memo)).collect()
}

/// Dijkstra from the initial state to the nearest goal by action cost.
/// Returns the optimal cost and whether the optimal path is unique, plus
/// one optimal state sequence.
pub fn uniform_cost_search(mdp: &Mdp) -> Option<(f64, bool, Vec<usize>)> {
    let n = mdp.n_states();
    // costs are small integers: exact in f64, compare as integers
    let mut dist = vec![u64::MAX; n];
    let mut ways = vec![0u32; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[mdp.initial()] = 0;
    ways[mdp.initial()] = 1;
    heap.push(Reverse((0u64, mdp.initial())));
    while let Some(Reverse((d, s))) = heap.pop() {
        if d > dist[s] || mdp.is_goal(s) {
            continue;
        }
        for a in 0..mdp.n_actions() {
            let Some(t) = mdp.transitions(s, a) else { continue };
            let next = t[0].0;
            let nd = d + mdp.cost(a) as u64;
            if nd < dist[next] {
                dist[next] = nd;
                ways[next] = ways[s];
                parent[next] = s;
                heap.push(Reverse((nd, next)));
            } else if nd == dist[next] {
                ways[next] = ways[next].saturating_add(ways[s]).max(2);
            }
        }
    }
    let goals: Vec<usize> = (0..n).filter(|&s| mdp.is_goal(s) && dist[s] != u64::MAX).collect();
    let best = goals.iter().map(|&g| dist[g]).min()?;
    let best_goals: Vec<usize> = goals.iter().copied().filter(|&g| dist[g] == best).collect();
    let unique = best_goals.len() == 1 && ways[best_goals[0]] == 1 && {
        // parallel equal-cost actions between the same pair also break uniqueness
        let mut path = vec![best_goals[0]];
        while *path.last().unwrap() != mdp.initial() {
            path.push(parent[*path.last().unwrap()]);
        }
        path.windows(2).all(|w| {
            let (to, from) = (w[0], w[1]);
            (0..mdp.n_actions())
                .filter(|&a| {
                    mdp.transitions(from, a)
                        .is_some_and(|t| t[0].0 == to && dist[from] + mdp.cost(a) as u64 == dist[to])
                })
                .count()
                == 1
        })
    };
    let mut path = vec![best_goals[0]];
    while *path.last().unwrap() != mdp.initial() {
        path.push(parent[*path.last().unwrap()]);
    }
    path.reverse();
    Some((best as f64, unique, path))
}

/// Follows a deterministic policy from the initial state to a terminal
/// state; `None` on a cycle.
pub fn policy_path(mdp: &Mdp, policy: &Policy) -> Option<(f64, Vec<usize>)> {
    let mut s = mdp.initial();
    let mut cost = 0.0;
    let mut path = vec![s];
    while !mdp.is_terminal(s) {
        let Choice::Action(a) = policy.choice[s] else { return None };
        cost += mdp.cost(a);
        s = mdp.transitions(s, a)?[0].0;
        if path.contains(&s) {
            return None;
        }
        path.push(s);
    }
    Some((cost, path))
}

/// Deterministic benchmark for Q-learning: a shuffled ladder where each
/// rung offers a cheap "advance" action, a detour, and a costly skip.
pub fn q_benchmark(rng: &mut ChaCha8Rng) -> Mdp {
    let n = rng.random_range(6..=12);
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    order.insert(0, 0);
    // order[k] is the k-th rung; the last rung is the goal
    let goal_state = order[n - 1];
    let mut rows: Vec<Vec<Option<Vec<(usize, f64)>>>> = vec![vec![None; 3]; n];
    for k in 0..n - 1 {
        let s = order[k];
        rows[s][0] = Some(vec![(order[k + 1], 1.0)]);
        let back = order[rng.random_range(0..=k)];
        rows[s][1] = Some(vec![(back, 1.0)]);
        if k + 2 < n {
            rows[s][2] = Some(vec![(order[k + 2], 1.0)]);
        }
    }
    let goal: Vec<bool> = (0..n).map(|s| s == goal_state).collect();
    let costs = vec![1.0, 1.0, 4.0];
    Mdp::new(costs, rows, goal, 0, 0.95, 20.0).unwrap()
}

/// States visited by the policy from the initial state until a terminal.
pub fn trajectory_states(mdp: &Mdp, policy: &Policy) -> Vec<usize> {
    let mut s = mdp.initial();
    let mut out = Vec::new();
    while !mdp.is_terminal(s) && !out.contains(&s) {
        out.push(s);
        let Choice::Action(a) = policy.choice[s] else { break };
        s = mdp.transitions(s, a).unwrap()[0].0;
    }
    out
}

/// Stochastic MDP whose transitions only move forward or stay put, so
/// absorption is certain; some states are dead ends.
pub fn layered_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Mdp {
    let n_actions = 2;
    let costs: Vec<f64> = (0..n_actions).map(|_| rng.random_range(0.5..3.0f64)).collect();
    let goal: Vec<bool> = (0..n).map(|s| s == n - 1).collect();
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let mut row: Vec<Option<Vec<(usize, f64)>>> = vec![None; n_actions];
        if s == n - 1 || (s > 0 && rng.random_bool(0.15)) {
            rows.push(row);
            continue;
        }
        for slot in row.iter_mut() {
            let stay = rng.random_range(0.05..0.5);
            let a = rng.random_range(s + 1..n);
            let b = rng.random_range(s + 1..n);
            let split = rng.random_range(0.2..0.8);
            let pa = (1.0 - stay) * split;
            *slot = Some(vec![(s, stay), (a, pa), (b, 1.0 - stay - pa)]);
        }
        rows.push(row);
    }
    Mdp::new(costs, rows, goal, 0, 0.95, 20.0).unwrap()
}
