//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use recourse_core::train::accuracy;
use recourse_core::{train_logistic, Dataset, Engine, FeatureSchema, Label, Profile, TrainConfig};
use serde_json::Value;

use crate::api::{parse_kind, router, AppState};
use crate::config::{build_engine, ServiceConfig};
use crate::ops;
use crate::sessions::Sessions;

#[derive(Debug, Parser)]
#[command(name = "recourse", version, about = "Counterfactual recourse and explanations for linear credit models")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Inputs shared by every command. Flags override the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; defaults to $RECOURSE_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    /// Labelled CSV: training data for `train`, distance weights otherwise.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `feature=step` for a continuous feature; repeatable.
    #[arg(long = "grid-step", global = true, value_name = "FEATURE=STEP")]
    pub grid_step: Vec<String>,
    #[arg(long, global = true)]
    pub state_cap: Option<usize>,
    /// `vi` or `q`.
    #[arg(long, global = true)]
    pub solver: Option<String>,
}

#[derive(Debug, Args)]
pub struct Target {
    #[arg(long)]
    pub profile: PathBuf,
    /// Desired decision: approve or deny.
    #[arg(long, default_value = "approve", value_parser = parse_label)]
    pub desired: Label,
}

fn parse_label(s: &str) -> std::result::Result<Label, String> {
    Label::parse(s).ok_or_else(|| format!("`{s}` is not a decision (approve/deny, 1/0)"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a logistic model and print its training accuracy.
    Train {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        l2: Option<f64>,
    },
    /// Decision and probability for a profile.
    Predict {
        #[arg(long)]
        profile: PathBuf,
    },
    /// Partial dependence of the decision on one feature.
    Pdp {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        feature: String,
        #[arg(long, default_value_t = ops::DEFAULT_PDP_POINTS)]
        points: usize,
    },
    /// Nearest (or k diverse) counterfactuals.
    Counterfactual {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Minimum-cost flipset over a per-feature action grid.
    Flipset {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = ops::DEFAULT_FLIPSET_STEPS)]
        max_steps: usize,
        /// Action-grid JSON; one generated from the schema otherwise.
        #[arg(long)]
        action_grid: Option<PathBuf>,
    },
    /// Solve the recourse MDP and print the plan.
    Plan {
        #[command(flatten)]
        target: Target,
    },
    /// Render explanations, one per line.
    Explain {
        #[command(flatten)]
        target: Target,
        /// non-directive, directive-specific, directive-generic or all.
        #[arg(long, default_value = "all")]
        kind: String,
        /// Print the full JSON payload instead of plain text.
        #[arg(long)]
        json: bool,
        /// Print the introduction before the texts.
        #[arg(long)]
        intro: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        session_log: Option<PathBuf>,
    },
    /// Print the published JSON shapes of all responses.
    Shapes,
}

impl Common {
    fn config(&self) -> Result<ServiceConfig> {
        let mut c = ServiceConfig::resolve(self.config.as_deref())?;
        if let Some(p) = &self.model {
            c.model = Some(p.clone());
        }
        if let Some(p) = &self.catalog {
            c.catalog = Some(p.clone());
        }
        if let Some(p) = &self.templates {
            c.templates = Some(p.clone());
        }
        if let Some(p) = &self.dataset {
            c.dataset = Some(p.clone());
        }
        if let Some(s) = self.seed {
            c.engine.seed = s;
        }
        if let Some(cap) = self.state_cap {
            c.engine.mdp.state_cap = cap;
        }
        if let Some(s) = &self.solver {
            c.engine.solver = s.clone();
        }
        c.engine.grid_steps.extend(ops::parse_steps(&self.grid_step)?);
        Ok(c)
    }
}

fn load_profile(path: &PathBuf) -> Result<Profile> {
    Profile::load(path).with_context(|| format!("loading profile {}", path.display()))
}

fn print_json(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn engine(config: &ServiceConfig) -> Result<Engine> {
    build_engine(config)
}

/// Runs one command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = cli.common.config()?;
    match cli.command {
        Command::Train {
            schema,
            out: path,
            epochs,
            learning_rate,
            l2,
        } => {
            let text = std::fs::read_to_string(&schema).with_context(|| format!("reading {}", schema.display()))?;
            let schema: FeatureSchema = serde_json::from_str(&text).context("parsing schema")?;
            let data_path = config
                .dataset
                .as_ref()
                .ok_or_else(|| recourse_core::Error::Parameter("train needs --dataset".into()))?;
            let data = Dataset::load_csv(&schema, data_path).with_context(|| format!("loading {}", data_path.display()))?;
            let mut tc = TrainConfig {
                seed: config.engine.seed,
                ..TrainConfig::default()
            };
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            if let Some(r) = learning_rate {
                tc.learning_rate = r;
            }
            if let Some(l) = l2 {
                tc.l2 = l;
            }
            let model = train_logistic(&schema, &data, &tc)?;
            model.save(&path).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "accuracy {:.4}", accuracy(&model, &data)?)?;
        }
        Command::Predict { profile } => {
            let e = engine(&config)?;
            let x = load_profile(&profile)?.vector(e.model().schema())?;
            print_json(out, &ops::predict(&e, &x)?)?;
        }
        Command::Pdp {
            profile,
            feature,
            points,
        } => {
            let e = engine(&config)?;
            let x = load_profile(&profile)?.vector(e.model().schema())?;
            print_json(out, &ops::pdp(&e, &x, &feature, points)?)?;
        }
        Command::Counterfactual { target, k } => {
            let e = engine(&config)?;
            let p = load_profile(&target.profile)?;
            print_json(out, &ops::counterfactuals(&e, &p, target.desired, k, &Default::default())?)?;
        }
        Command::Flipset {
            target,
            budget,
            max_steps,
            action_grid,
        } => {
            let e = engine(&config)?;
            let x = load_profile(&target.profile)?.vector(e.model().schema())?;
            let grid = match action_grid {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Some(serde_json::from_str(&text).context("parsing action grid")?)
                }
                None => None,
            };
            let v = ops::flipset(&e, &x, target.desired, budget.unwrap_or(f64::INFINITY), grid.as_ref(), max_steps)?;
            print_json(out, &v)?;
        }
        Command::Plan { target } => {
            let e = engine(&config)?;
            let x = load_profile(&target.profile)?.vector(e.model().schema())?;
            print_json(out, &ops::plan(&e, &x, target.desired, None, None)?)?;
        }
        Command::Explain {
            target,
            kind,
            json,
            intro,
        } => {
            let e = engine(&config)?;
            let p = load_profile(&target.profile)?;
            let kind = parse_kind(Some(&kind))?;
            if json {
                print_json(out, &ops::explain(&e, &p, target.desired, kind, None, None)?)?;
            } else {
                let de = e.explain(&p, target.desired, None, None)?;
                let texts = e.render(&de, kind)?;
                if intro {
                    if let Some(t) = texts.first() {
                        writeln!(out, "{}", t.introduction())?;
                    }
                }
                for t in &texts {
                    writeln!(out, "{}", t.text)?;
                }
            }
        }
        Command::Serve { bind, session_log } => {
            let bind = bind.unwrap_or_else(|| config.bind.clone());
            let log = session_log.or_else(|| config.session_log.clone());
            let engine = engine(&config)?;
            let sessions = match &log {
                Some(p) => Sessions::with_log(p)?,
                None => Sessions::in_memory(),
            };
            tracing::info!(sessions = sessions.len(), "loaded sessions");
            let state = Arc::new(AppState { engine, sessions });
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .with_context(|| format!("binding {bind}"))?;
                tracing::info!(addr = %listener.local_addr()?, "listening");
                axum::serve(listener, router(state)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Shapes => {
            let all: serde_json::Map<String, Value> =
                crate::shapes::all().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            print_json(out, &Value::Object(all))?;
        }
    }
    Ok(())
}
