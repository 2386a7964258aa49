//! HTTP API over a shared, immutable engine and the session store.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use recourse_core::counterfactual::ActionGrid;
use recourse_core::explainer::ExplanationKind;
use recourse_core::{Engine, Error, FeatureVector, Label, Profile};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::ops;
use crate::sessions::Sessions;

pub struct AppState {
    pub engine: Engine,
    pub sessions: Sessions,
}

pub type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid-input", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not-found", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NoRecourse | Error::Unreachable(_) | Error::NoEnabledActions => {
                (StatusCode::UNPROCESSABLE_ENTITY, "unreachable")
            }
            Error::StateCap { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "state-cap"),
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            _ => (StatusCode::BAD_REQUEST, "invalid-input"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(core) => core.into(),
            Err(e) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", format!("{e:#}")),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid-json", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// JSON body extractor whose rejections use the error shape.
pub struct Body<T>(pub T);

impl<S, T> axum::extract::FromRequest<S> for Body<T>
where
    S: Send + Sync,
    T: serde::de::DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<T>::from_request(req, state).await?;
        Ok(Body(v))
    }
}

/// The customer a request is about: an inline profile or a stored session.
#[derive(Debug, Default, Deserialize)]
pub struct Subject {
    #[serde(default)]
    pub profile: Option<Value>,
    #[serde(default)]
    pub session: Option<String>,
}

impl Subject {
    fn resolve(&self, state: &AppState) -> Result<Profile, ApiError> {
        match (&self.profile, &self.session) {
            (Some(p), None) => Ok(Profile::from_json(p.clone())?),
            (None, Some(id)) => state
                .sessions
                .get(id)
                .map(|s| s.as_profile())
                .ok_or_else(|| ApiError::not_found(format!("no session `{id}`"))),
            (Some(_), Some(_)) => Err(ApiError::bad_request("give either `profile` or `session`, not both")),
            (None, None) => Err(ApiError::bad_request("missing `profile` or `session`")),
        }
    }

    fn vector(&self, state: &AppState) -> Result<(Profile, FeatureVector), ApiError> {
        let p = self.resolve(state)?;
        let x = p.vector(state.engine.model().schema())?;
        Ok((p, x))
    }
}

async fn blocking<F>(f: F) -> ApiResult
where
    F: FnOnce() -> ApiResult + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn predict(State(st): State<Shared>, Body(subject): Body<Subject>) -> ApiResult {
    let (_, x) = subject.vector(&st)?;
    Ok(Json(ops::predict(&st.engine, &x)?))
}

#[derive(Debug, Deserialize)]
struct WhatIf {
    #[serde(flatten)]
    subject: Subject,
    #[serde(default)]
    changes: Map<String, Value>,
    #[serde(default)]
    commit: bool,
}

async fn whatif(State(st): State<Shared>, Body(req): Body<WhatIf>) -> ApiResult {
    let schema = st.engine.model().schema();
    let (_, base) = req.subject.vector(&st)?;
    let x = schema.with_changes(&base, &req.changes)?;
    let mut body = ops::predict(&st.engine, &x)?;
    let mut history_len = None;
    if req.commit {
        let id = req
            .subject
            .session
            .as_deref()
            .ok_or_else(|| ApiError::bad_request("`commit` needs a `session`"))?;
        let s = st
            .sessions
            .commit(id, req.changes.clone(), &body, schema)?
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))?;
        history_len = Some(s.history.len());
    } else if let Some(id) = &req.subject.session {
        history_len = st.sessions.get(id).map(|s| s.history.len());
    }
    body["profile"] = Value::Object(schema.vector_to_json(&x));
    body["committed"] = json!(req.commit);
    body["session"] = json!(req.subject.session);
    body["history_len"] = json!(history_len);
    Ok(Json(body))
}

#[derive(Debug, Deserialize)]
struct PdpQuery {
    profile: Option<String>,
    session: Option<String>,
    grid: Option<usize>,
}

async fn pdp(State(st): State<Shared>, Path(feature): Path<String>, Query(q): Query<PdpQuery>) -> ApiResult {
    let profile = match &q.profile {
        Some(text) => Some(
            serde_json::from_str::<Value>(text)
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid-json", format!("profile: {e}")))?,
        ),
        None => None,
    };
    let subject = Subject {
        profile,
        session: q.session,
    };
    let (_, x) = subject.vector(&st)?;
    Ok(Json(ops::pdp(&st.engine, &x, &feature, q.grid.unwrap_or(ops::DEFAULT_PDP_POINTS))?))
}

fn default_k() -> usize {
    1
}

#[derive(Debug, Deserialize)]
struct CounterfactualRequest {
    #[serde(flatten)]
    subject: Subject,
    #[serde(default)]
    desired: Option<Label>,
    #[serde(default = "default_k")]
    k: usize,
    /// Step overrides for continuous features.
    #[serde(default)]
    grid: BTreeMap<String, f64>,
    /// Replaces the profile's focus when given.
    #[serde(default)]
    focus: Option<Vec<String>>,
}

async fn counterfactuals(State(st): State<Shared>, Body(req): Body<CounterfactualRequest>) -> ApiResult {
    blocking(move || {
        let mut profile = req.subject.resolve(&st)?;
        if let Some(f) = req.focus {
            profile.focus = f;
        }
        let desired = req.desired.unwrap_or(Label::Positive);
        Ok(Json(ops::counterfactuals(&st.engine, &profile, desired, req.k, &req.grid)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct FlipsetRequest {
    #[serde(flatten)]
    subject: Subject,
    #[serde(default)]
    desired: Option<Label>,
    #[serde(default)]
    budget: Option<f64>,
    #[serde(default)]
    max_steps: Option<usize>,
    #[serde(default)]
    grid: Option<ActionGrid>,
}

async fn flipset(State(st): State<Shared>, Body(req): Body<FlipsetRequest>) -> ApiResult {
    blocking(move || {
        let (_, x) = req.subject.vector(&st)?;
        Ok(Json(ops::flipset(
            &st.engine,
            &x,
            req.desired.unwrap_or(Label::Positive),
            req.budget.unwrap_or(f64::INFINITY),
            req.grid.as_ref(),
            req.max_steps.unwrap_or(ops::DEFAULT_FLIPSET_STEPS),
        )?))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct PlanRequest {
    #[serde(flatten)]
    subject: Subject,
    #[serde(default)]
    desired: Option<Label>,
    #[serde(default)]
    solver: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn plan(State(st): State<Shared>, Body(req): Body<PlanRequest>) -> ApiResult {
    blocking(move || {
        let (_, x) = req.subject.vector(&st)?;
        let desired = req.desired.unwrap_or(Label::Positive);
        Ok(Json(ops::plan(&st.engine, &x, desired, req.solver.as_deref(), req.seed)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct ExplainRequest {
    #[serde(flatten)]
    subject: Subject,
    #[serde(default)]
    desired: Option<Label>,
    /// A kind name, or `all` / absent for the balanced triple.
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    solver: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
}

pub fn parse_kind(kind: Option<&str>) -> Result<Option<ExplanationKind>, Error> {
    match kind {
        None | Some("all") => Ok(None),
        Some(k) => k.parse().map(Some),
    }
}

async fn explain(State(st): State<Shared>, Body(req): Body<ExplainRequest>) -> ApiResult {
    blocking(move || {
        let profile = req.subject.resolve(&st)?;
        let kind = parse_kind(req.kind.as_deref())?;
        let desired = req.desired.unwrap_or(Label::Positive);
        Ok(Json(ops::explain(
            &st.engine,
            &profile,
            desired,
            kind,
            req.solver.as_deref(),
            req.seed,
        )?))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    profile: Value,
}

async fn create_session(State(st): State<Shared>, Body(req): Body<CreateSession>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let profile = Profile::from_json(req.profile)?;
    profile.vector(st.engine.model().schema())?;
    let s = st.sessions.create(st.engine.model().digest(), profile)?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(s).map_err(Error::from)?)))
}

async fn get_session(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let s = st
        .sessions
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))?;
    Ok(Json(serde_json::to_value(s).map_err(Error::from)?))
}

async fn shapes() -> Json<Value> {
    Json(Value::Object(
        crate::shapes::all().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    ))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such route")
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/whatif", post(whatif))
        .route("/pdp/{feature}", get(pdp))
        .route("/counterfactuals", post(counterfactuals))
        .route("/flipset", post(flipset))
        .route("/plan", post(plan))
        .route("/explain", post(explain))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/shapes", get(shapes))
        .fallback(fallback)
        .with_state(state)
}
