//! Exact branch-and-bound over per-feature candidate values.
//!
//! Each column offers the unchanged value (cost 0) plus alternatives with a
//! cost and a log-odds shift. Since the model is linear in its per-feature
//! contributions, the reachable log-odds from a partial assignment are
//! bounded by the best remaining shifts, and the remaining cost is bounded
//! below by the cheapest cost per unit of shift.

use std::cmp::Ordering;

use crate::model::{Label, LinearModel};
use crate::schema::FeatureVector;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Choice {
    pub value: f64,
    pub cost: f64,
    pub shift: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Column {
    pub feature: usize,
    /// `choices[0]` is the unchanged value.
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub state: FeatureVector,
    pub cost: f64,
    /// Changed features in schema order.
    pub changed: Vec<usize>,
}

/// Ordering used to pick among equal-cost solutions: fewer changed features,
/// then lexicographic changed-feature indices, then lexicographic values.
pub(crate) fn compare(a: &Solution, b: &Solution) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then(a.changed.len().cmp(&b.changed.len()))
        .then_with(|| a.changed.cmp(&b.changed))
        .then_with(|| {
            a.changed
                .iter()
                .map(|&i| a.state.get(i))
                .zip(b.changed.iter().map(|&i| b.state.get(i)))
                .map(|(u, v)| u.total_cmp(&v))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

pub(crate) struct Problem<'a> {
    pub model: &'a LinearModel,
    pub x: &'a FeatureVector,
    pub desired: Label,
    pub columns: Vec<Column>,
    /// Changed-feature sets that may not be returned.
    pub forbidden: &'a [Vec<usize>],
    pub budget: f64,
    /// Recomputes the exact cost of a candidate state.
    pub cost_of: &'a dyn Fn(&FeatureVector) -> f64,
}

const SLACK: f64 = 1e-7;

struct Bounds {
    /// Largest (desired positive) or smallest (desired negative) shift
    /// obtainable from columns `k..`.
    best_shift: Vec<f64>,
    /// Cheapest cost per unit of useful shift over columns `k..`.
    best_rate: Vec<f64>,
}

impl Problem<'_> {
    fn sign(&self) -> f64 {
        match self.desired {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    fn bounds(&self) -> Bounds {
        let s = self.sign();
        let n = self.columns.len();
        let mut best_shift = vec![0.0; n + 1];
        let mut best_rate = vec![f64::INFINITY; n + 1];
        for k in (0..n).rev() {
            let col = &self.columns[k];
            let gain = col.choices.iter().map(|c| s * c.shift).fold(0.0, f64::max);
            best_shift[k] = best_shift[k + 1] + gain;
            let rate = col
                .choices
                .iter()
                .filter(|c| s * c.shift > 0.0)
                .map(|c| c.cost / (s * c.shift))
                .fold(f64::INFINITY, f64::min);
            best_rate[k] = best_rate[k + 1].min(rate);
        }
        Bounds { best_shift, best_rate }
    }

    /// Log-odds the desired label needs, in signed units: the solution must
    /// reach `s·z ≥ s·target` (up to the final exact check).
    fn target(&self) -> f64 {
        let t = self.model.threshold();
        (t / (1.0 - t)).ln()
    }

    pub fn solve(&self) -> Option<Solution> {
        let bounds = self.bounds();
        let s = self.sign();
        let base = self.model.logit_unchecked(self.x);
        let mut state = self.x.clone();
        let mut best: Option<Solution> = None;
        let mut search = Search {
            problem: self,
            bounds: &bounds,
            need: s * self.target(),
            best: &mut best,
        };
        search.visit(0, s * base, 0.0, &mut state);
        best
    }
}

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    bounds: &'p Bounds,
    need: f64,
    best: &'p mut Option<Solution>,
}

impl Search<'_, '_> {
    fn limit(&self) -> f64 {
        match self.best.as_ref() {
            Some(b) => b.cost.min(self.problem.budget),
            None => self.problem.budget,
        }
    }

    fn visit(&mut self, k: usize, z: f64, cost: f64, state: &mut FeatureVector) {
        let limit = self.limit();
        if cost > limit * (1.0 + 1e-12) + 1e-12 {
            return;
        }
        if z + self.bounds.best_shift[k] < self.need - SLACK {
            return;
        }
        let gap = self.need - z;
        if gap > SLACK {
            let lower = gap * self.bounds.best_rate[k] * (1.0 - 1e-9) - SLACK;
            if cost + lower > limit * (1.0 + 1e-12) + 1e-12 {
                return;
            }
        }
        if k == self.problem.columns.len() {
            self.leaf(state);
            return;
        }
        let s = self.problem.sign();
        let feature = self.problem.columns[k].feature;
        let original = state.get(feature);
        for c in 0..self.problem.columns[k].choices.len() {
            let choice = self.problem.columns[k].choices[c];
            state.set(feature, choice.value);
            self.visit(k + 1, z + s * choice.shift, cost + choice.cost, state);
        }
        state.set(feature, original);
    }

    fn leaf(&mut self, state: &FeatureVector) {
        let p = self.problem;
        if p.model.classify_unchecked(state) != p.desired {
            return;
        }
        let changed = p.x.diff(state);
        if p.forbidden.contains(&changed) {
            return;
        }
        let cost = (p.cost_of)(state);
        if cost > p.budget {
            return;
        }
        let candidate = Solution {
            state: state.clone(),
            cost,
            changed,
        };
        let better = match self.best.as_ref() {
            None => true,
            Some(b) => compare(&candidate, b) == Ordering::Less,
        };
        if better {
            *self.best = Some(candidate);
        }
    }
}
