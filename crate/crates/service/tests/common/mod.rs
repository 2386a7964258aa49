#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use recourse_service::api::{router, AppState};
use recourse_service::config::{build_engine, ServiceConfig};
use recourse_service::sessions::Sessions;
use serde_json::Value;
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/lending-demo")
}

pub fn scenario(id: usize) -> PathBuf {
    fixtures().join("scenarios").join(format!("{id:02}"))
}

pub fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn config(id: usize) -> ServiceConfig {
    ServiceConfig {
        model: Some(fixtures().join("model.json")),
        catalog: Some(scenario(id).join("catalog.json")),
        templates: Some(fixtures().join("templates.json")),
        dataset: Some(fixtures().join("dataset.csv")),
        ..ServiceConfig::default()
    }
}

pub fn app(id: usize) -> Router {
    let engine = build_engine(&config(id)).unwrap();
    router(Arc::new(AppState {
        engine,
        sessions: Sessions::in_memory(),
    }))
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

/// Validation errors of `v` against `schema`, empty when it conforms.
pub fn shape_errors(schema: &Value, v: &Value) -> Vec<String> {
    let validator = jsonschema::validator_for(schema).unwrap();
    validator.iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}

pub fn assert_shape(schema: &Value, v: &Value) {
    let errors = shape_errors(schema, v);
    assert!(errors.is_empty(), "{errors:?}\n{v:#}");
}

pub fn pdp_uri(feature: &str, profile: &Value, grid: Option<usize>) -> String {
    let mut q = vec![("profile", profile.to_string())];
    if let Some(g) = grid {
        q.push(("grid", g.to_string()));
    }
    format!("/pdp/{feature}?{}", serde_urlencoded::to_string(q).unwrap())
}
