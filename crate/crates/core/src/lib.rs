pub mod counterfactual;
pub mod data;
pub mod engine;
pub mod error;
pub mod explainer;
pub mod mad;
pub mod model;
pub mod planner;
pub mod profile;
pub mod schema;
pub mod train;

pub use counterfactual::{
    diverse_counterfactuals, min_cost_flipset, nearest_counterfactual, weighted_distance, ActionGrid, Counterfactual,
    FlipSet, SearchGrid,
};
pub use data::Dataset;
pub use engine::{Engine, EngineConfig, Planned};
pub use error::{Error, Result};
pub use explainer::{assemble, render, render_all, DirectiveExplanation, ExplanationKind, ExplanationText, TemplateSet};
pub use mad::MadWeights;
pub use model::{Label, LinearModel, Weight};
pub use profile::Profile;
pub use schema::{FeatureKind, FeatureSchema, FeatureSpec, FeatureVector, Mutability};
pub use train::{train_logistic, TrainConfig};
