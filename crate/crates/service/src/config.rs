//! Service configuration: file paths, engine defaults and bind address,
//! read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use recourse_core::planner::ActionCatalog;
use recourse_core::{Dataset, Engine, EngineConfig, LinearModel, MadWeights, TemplateSet};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "RECOURSE_CONFIG";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub model: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    /// Source of the distance weights; uniform weights without it.
    pub dataset: Option<PathBuf>,
    pub bind: String,
    /// Append-only session log, replayed on startup.
    pub session_log: Option<PathBuf>,
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            model: None,
            catalog: None,
            templates: None,
            dataset: None,
            bind: DEFAULT_BIND.into(),
            session_log: None,
            engine: EngineConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: ServiceConfig = toml::from_str(s).map_err(|e| {
            anyhow::Error::new(recourse_core::Error::Parameter(format!("config: {e}")))
        })?;
        Ok(c)
    }

    /// Relative paths in the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut c = ServiceConfig::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.model, &mut c.catalog, &mut c.templates, &mut c.dataset, &mut c.session_log]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    /// `explicit`, else the file named by `RECOURSE_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => ServiceConfig::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => ServiceConfig::load(Path::new(&p)),
                _ => Ok(ServiceConfig::default()),
            },
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| {
        anyhow::Error::new(recourse_core::Error::Parameter(format!("no {what} given (flag or config)")))
    })
}

pub fn load_model(path: &Option<PathBuf>) -> Result<LinearModel> {
    let p = required(path, "model")?;
    LinearModel::load(p).with_context(|| format!("loading model {}", p.display()))
}

pub fn load_weights(model: &LinearModel, dataset: &Option<PathBuf>) -> Result<MadWeights> {
    match dataset {
        Some(p) => {
            let data = Dataset::load_csv(model.schema(), p).with_context(|| format!("loading dataset {}", p.display()))?;
            Ok(MadWeights::from_dataset(model.schema(), &data)?)
        }
        None => Ok(MadWeights::uniform(model.schema().len())),
    }
}

/// Builds the engine. A missing catalog means no actions; missing
/// templates mean the built-in phrasing.
pub fn build_engine(config: &ServiceConfig) -> Result<Engine> {
    let model = load_model(&config.model)?;
    let catalog = match &config.catalog {
        Some(p) => ActionCatalog::load(p).with_context(|| format!("loading catalog {}", p.display()))?,
        None => ActionCatalog::default(),
    };
    let templates = match &config.templates {
        Some(p) => TemplateSet::load(p).with_context(|| format!("loading templates {}", p.display()))?,
        None => TemplateSet::default(),
    };
    let weights = load_weights(&model, &config.dataset)?;
    Ok(Engine::new(model, catalog, templates, weights, config.engine.clone())?)
}
