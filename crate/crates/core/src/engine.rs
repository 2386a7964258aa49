//! The full pipeline: profile, counterfactual, recourse MDP, policy and
//! explanation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counterfactual::{nearest_counterfactual, Counterfactual, SearchGrid};
use crate::error::{Error, Result};
use crate::explainer::{assemble, render, render_all, DirectiveExplanation, ExplanationKind, ExplanationText, Provenance, TemplateSet};
use crate::mad::MadWeights;
use crate::model::{Label, LinearModel};
use crate::planner::{
    build_recourse_mdp, policy_cost, reachability, ActionCatalog, Binning, MdpParams, Policy, PolicyCost,
    QLearningParams, RecourseMdp, SolverRegistry, DEFAULT_EPSILON,
};
use crate::profile::Profile;
use crate::schema::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Step overrides for continuous features, used by both the
    /// counterfactual grid and the MDP binning.
    pub grid_steps: BTreeMap<String, f64>,
    pub mdp: MdpParams,
    pub epsilon: f64,
    pub q_learning: QLearningParams,
    pub solver: String,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            grid_steps: BTreeMap::new(),
            mdp: MdpParams::default(),
            epsilon: DEFAULT_EPSILON,
            q_learning: QLearningParams::default(),
            solver: "vi".into(),
            seed: 0,
        }
    }
}

/// A solved recourse MDP.
#[derive(Debug, Clone)]
pub struct Planned {
    pub recourse: RecourseMdp,
    pub policy: Policy,
    pub reachability: f64,
    pub cost: PolicyCost,
    pub solver: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    model: LinearModel,
    catalog: ActionCatalog,
    templates: TemplateSet,
    weights: MadWeights,
    registry: SolverRegistry,
    config: EngineConfig,
}

impl Engine {
    pub fn new(
        model: LinearModel,
        catalog: ActionCatalog,
        templates: TemplateSet,
        weights: MadWeights,
        config: EngineConfig,
    ) -> Result<Self> {
        let schema = model.schema();
        catalog.validate(schema)?;
        if weights.len() != schema.len() {
            return Err(Error::Mismatch(format!(
                "{} distance weights for {} features",
                weights.len(),
                schema.len()
            )));
        }
        for (name, step) in &config.grid_steps {
            schema.index_of(name)?;
            if !(step.is_finite() && *step > 0.0) {
                return Err(Error::Parameter(format!("grid step for `{name}` must be > 0")));
            }
        }
        let registry = SolverRegistry::with_defaults(config.epsilon, config.q_learning.clone());
        registry.get(&config.solver)?;
        Ok(Engine {
            model,
            catalog,
            templates,
            weights,
            registry,
            config,
        })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn catalog(&self) -> &ActionCatalog {
        &self.catalog
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn weights(&self) -> &MadWeights {
        &self.weights
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn registry(&self) -> &SolverRegistry {
        &self.registry
    }

    /// Search grid from the schema with the configured steps, restricted to
    /// `focus` when it is non-empty.
    pub fn search_grid(&self, focus: &[String]) -> Result<SearchGrid> {
        let schema = self.model.schema();
        let mut grid = SearchGrid::from_schema(schema);
        for (name, step) in &self.config.grid_steps {
            grid = grid.with_step(schema, name, *step)?;
        }
        if !focus.is_empty() {
            grid = grid.restricted_to(schema, focus)?;
        }
        Ok(grid)
    }

    pub fn counterfactual(&self, x: &FeatureVector, target: Label, focus: &[String]) -> Result<Option<Counterfactual>> {
        nearest_counterfactual(&self.model, x, target, &self.search_grid(focus)?, &self.weights)
    }

    pub fn binning(&self, x: &FeatureVector) -> Result<Binning> {
        Binning::anchored(self.model.schema(), x, &self.config.grid_steps)
    }

    /// Builds and solves the recourse MDP toward `target`.
    pub fn plan(&self, x: &FeatureVector, target: Label, solver: Option<&str>, seed: Option<u64>) -> Result<Planned> {
        let name = solver.unwrap_or(&self.config.solver);
        let solver = self.registry.get(name)?;
        let seed = seed.unwrap_or(self.config.seed);
        let recourse = build_recourse_mdp(&self.model, &self.catalog, x, target, &self.binning(x)?, &self.config.mdp)?;
        let policy = solver.solve(recourse.mdp(), seed)?;
        let reachability = reachability(recourse.mdp(), &policy)?;
        let cost = policy_cost(recourse.mdp(), &policy)?;
        Ok(Planned {
            recourse,
            policy,
            reachability,
            cost,
            solver: solver.name().to_string(),
            seed,
        })
    }

    /// Label the explanation works toward: `desired`, or its opposite when
    /// the profile already has it.
    pub fn target_for(&self, x: &FeatureVector, desired: Label) -> Result<Label> {
        let y = self.model.classify(x)?;
        Ok(if y == desired { desired.flipped() } else { desired })
    }

    /// Assembles the explanation tuple for a profile. A catalog with no
    /// action enabled at the profile yields a tuple flagged unreachable.
    pub fn explain(
        &self,
        profile: &Profile,
        desired: Label,
        solver: Option<&str>,
        seed: Option<u64>,
    ) -> Result<DirectiveExplanation> {
        let x = profile.vector(self.model.schema())?;
        let target = self.target_for(&x, desired)?;
        let cf = self
            .counterfactual(&x, target, &profile.focus)?
            .ok_or_else(|| Error::Unreachable("no counterfactual on the search grid".into()))?;
        let planned = match self.plan(&x, target, solver, seed) {
            Ok(p) => Some(p),
            Err(Error::NoEnabledActions) => None,
            Err(e) => return Err(e),
        };
        let provenance = Provenance {
            grid: if profile.focus.is_empty() {
                "all mutable features".into()
            } else {
                profile.focus.join(",")
            },
            catalog: format!("{} actions", self.catalog.len()),
            solver: planned
                .as_ref()
                .map(|p| format!("{} (seed {})", p.solver, p.seed))
                .unwrap_or_else(|| "none".into()),
        };
        let de = assemble(
            &self.model,
            &x,
            &cf,
            planned.as_ref().map(|p| (&p.recourse, &p.policy)),
            desired,
        )?;
        Ok(de
            .with_presentation(profile.scenario.clone(), profile.customer.clone())
            .with_provenance(provenance))
    }

    /// One kind, or all three with the non-directive filler balanced.
    pub fn render(&self, de: &DirectiveExplanation, kind: Option<ExplanationKind>) -> Result<Vec<ExplanationText>> {
        match kind {
            Some(k) => Ok(vec![render(de, k, &self.templates)?]),
            None => render_all(de, &self.templates),
        }
    }
}
