use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use psi_cli::service::{router, AppState, Options};
use serde_json::{json, Value};
use tower::ServiceExt;

const PFD_MODEL: &str = r#"{
  "version": 1,
  "title": "pfd",
  "nodes": [
    {"id": "p", "kind": "ContinuousInterval", "bounds": [0, 1], "cpd": {"expression": "Uniform(0, 1)"}},
    {"id": "demands", "kind": "IntegerInterval", "cpd": {"expression": "Uniform(0, 1E9)"}},
    {"id": "observed", "kind": "IntegerInterval", "parents": ["demands", "p"], "cpd": {"expression": "Binomial(demands, p)"}}
  ]
}"#;

struct Api {
    app: Router,
}

impl Api {
    fn new() -> Self {
        Self::with(AppState::new(Options::default()))
    }

    fn with(state: AppState) -> Self {
        Api { app: router(state) }
    }

    async fn send(&self, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Method::GET, uri, None).await
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.send(Method::POST, uri, Some(body.to_string())).await
    }

    async fn scenario(&self, body: Value) -> String {
        let (status, v) = self.post("/api/scenarios", body).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    async fn patch(&self, scenario: &str, node: &str, value: Value) -> StatusCode {
        self.send(Method::PATCH, &format!("/api/scenarios/{scenario}/evidence/{node}"), Some(value.to_string())).await.0
    }

    async fn mean(&self, scenario: &str, node: &str) -> f64 {
        let (status, v) = self.get(&format!("/api/scenarios/{scenario}/posteriors?nodes={node}")).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v["nodes"][node]["mean"].as_f64().unwrap()
    }
}

fn assert_error(status: StatusCode, body: &Value, want: StatusCode) {
    assert_eq!(status, want, "{body}");
    assert!(body["code"].is_string() && body["message"].is_string(), "{body}");
    assert!(body.get("detail").is_some(), "{body}");
}

#[tokio::test]
async fn model_catalog_lists_bundled_and_uploaded() {
    let api = Api::new();
    let (status, v) = api.get("/api/models").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 21);

    let (status, v) = api.send(Method::POST, "/api/models?id=mine", Some(PFD_MODEL.to_string())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["source"], "uploaded");
    let (_, v) = api.get("/api/models").await;
    assert!(v.as_array().unwrap().iter().any(|m| m["id"] == "mine"));

    let (status, v) = api.send(Method::POST, "/api/models", Some("{\"version\": 1, \"nodes\": [".into())).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);
    assert!(v["detail"]["line"].is_number());
    let (status, v) = api.send(Method::POST, "/api/models?id=mine", Some(PFD_MODEL.to_string())).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn graph_has_nodes_edges_and_groups() {
    let api = Api::new();
    let (status, v) = api.get("/api/models/fig13_hammer_reliability/graph").await;
    assert_eq!(status, StatusCode::OK);
    let nodes = v["nodes"].as_array().unwrap();
    let edges = v["edges"].as_array().unwrap();
    let parents: usize = nodes.iter().map(|n| n["parents"].as_array().unwrap().len()).sum();
    assert_eq!(edges.len(), parents);
    assert!(v["groups"].as_array().unwrap().len() >= 3, "{}", v["groups"]);
    assert!(nodes.iter().all(|n| n["kind"].is_string()));
    let (status, v) = api.get("/api/models/nope/graph").await;
    assert_error(status, &v, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn evidence_updates_posteriors() {
    let api = Api::new();
    let (_, _) = api.send(Method::POST, "/api/models?id=pfd", Some(PFD_MODEL.to_string())).await;
    let s = api.scenario(json!({ "model": "pfd" })).await;
    let prior = api.mean(&s, "p").await;
    assert!((prior - 0.5).abs() < 1e-6);

    assert_eq!(api.patch(&s, "observed", json!(10)).await, StatusCode::OK);
    assert_eq!(api.patch(&s, "demands", json!({ "value": 1000 })).await, StatusCode::OK);
    let set = api.mean(&s, "p").await;
    assert!((set - 11.0 / 1002.0).abs() < 1e-4, "{set}");

    assert_eq!(api.patch(&s, "observed", Value::Null).await, StatusCode::OK);
    assert_eq!(api.patch(&s, "demands", Value::Null).await, StatusCode::OK);
    assert!((api.mean(&s, "p").await - prior).abs() < 1e-12);

    let (status, v) = api.send(Method::PUT, &format!("/api/scenarios/{s}/evidence"), Some(r#"{"observed": 10, "demands": 1000}"#.into())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!((api.mean(&s, "p").await - set).abs() < 1e-12);
}

#[tokio::test]
async fn repeated_reads_are_identical() {
    let api = Api::new();
    let s = api.scenario(json!({ "model": "fig5b_pfd_limited_data" })).await;
    let uri = format!("/api/scenarios/{s}/posteriors");
    let (_, first) = api.get(&uri).await;
    let (_, scenario) = api.get(&format!("/api/scenarios/{s}")).await;
    assert_eq!(scenario["cached"], true);
    let (_, second) = api.get(&uri).await;
    assert_eq!(first, second);
    assert!(first["warnings"].is_array());

    let (status, v) = api.get(&format!("{uri}?nodes=p,similarity")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["nodes"].as_object().unwrap().len(), 2);
    let (status, v) = api.get(&format!("{uri}?nodes=nope")).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn compare_reports_the_effect_of_a_control() {
    let api = Api::new();
    let a = api.scenario(json!({ "model": "fig17b_risk_control", "evidence": { "control": 0 } })).await;
    let b = api.scenario(json!({ "model": "fig17b" })).await;
    let (status, v) = api.post("/api/compare", json!({ "scenarioA": a, "scenarioB": b })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let r = &v["nodes"]["residual"];
    assert!((r["a"]["mean"].as_f64().unwrap() - 0.08).abs() < 1e-9);
    assert!((r["b"]["mean"].as_f64().unwrap() - 0.04).abs() < 1e-9);
    assert!((r["delta_mean"].as_f64().unwrap() + 0.04).abs() < 1e-9);

    let (_, same) = api.post("/api/compare", json!({ "scenarioA": b, "scenarioB": b })).await;
    assert!(same["nodes"].as_object().unwrap().values().all(|n| n["delta_mean"] == 0.0));

    let other = api.scenario(json!({ "model": "fig4b_hammer_pfd" })).await;
    let (status, v) = api.post("/api/compare", json!({ "scenarioA": a, "scenarioB": other })).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn interventions_cut_incoming_edges() {
    let api = Api::new();
    let s = api.scenario(json!({ "model": "fig17b_risk_control" })).await;
    let (status, v) = api.post(&format!("/api/scenarios/{s}/interventions"), json!({ "node": "residual", "value": 0.5 })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!((api.mean(&s, "residual").await - 0.5).abs() < 1e-12);
    assert!((api.mean(&s, "event").await - 0.08).abs() < 1e-12);

    let (status, _) = api.post(&format!("/api/scenarios/{s}/interventions"), json!({ "node": "residual", "value": null })).await;
    assert_eq!(status, StatusCode::OK);
    assert!((api.mean(&s, "residual").await - 0.04).abs() < 1e-9);

    let (status, v) = api.post(&format!("/api/scenarios/{s}/interventions"), json!({ "node": "residual", "value": 7 })).await;
    assert_error(status, &v, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, v) = api.post(&format!("/api/scenarios/{s}/interventions"), json!({ "node": "ghost", "value": 0.1 })).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn errors_use_the_documented_statuses() {
    let api = Api::new();
    let (status, v) = api.get("/api/scenarios/unknown/posteriors").await;
    assert_error(status, &v, StatusCode::NOT_FOUND);
    let (status, v) = api.post("/api/scenarios", json!({ "model": "nope" })).await;
    assert_error(status, &v, StatusCode::NOT_FOUND);
    let (status, v) = api.send(Method::POST, "/api/scenarios", Some("not json".into())).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);

    let s = api.scenario(json!({ "model": "fig4b_hammer_pfd" })).await;
    assert_eq!(api.patch(&s, "ghost", json!(1)).await, StatusCode::BAD_REQUEST);

    // More failures than demands.
    assert_eq!(api.patch(&s, "observed", json!(2000)).await, StatusCode::OK);
    let (status, v) = api.get(&format!("/api/scenarios/{s}/posteriors")).await;
    assert_error(status, &v, StatusCode::CONFLICT);
    assert_eq!(v["code"], "zero_probability_evidence");

    let s = api.scenario(json!({ "model": "fig12b_manufacturing_quality" })).await;
    assert_eq!(api.patch(&s, "latent_quality", json!("superb")).await, StatusCode::OK);
    let (status, v) = api.get(&format!("/api/scenarios/{s}/posteriors")).await;
    assert_error(status, &v, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn slow_inference_times_out() {
    let options = Options { timeout: Duration::from_millis(1), ..Default::default() };
    let api = Api::with(AppState::new(options));
    let s = api.scenario(json!({ "model": "fig22b_aircraft" })).await;
    let (status, v) = api.get(&format!("/api/scenarios/{s}/posteriors")).await;
    assert_error(status, &v, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn snapshots_restore_scenarios_and_uploads() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(Options::default());
    let api = Api::with(state.clone());
    api.send(Method::POST, "/api/models?id=pfd", Some(PFD_MODEL.to_string())).await;
    let s = api.scenario(json!({ "model": "pfd", "evidence": { "observed": 10, "demands": 1000 } })).await;
    state.save(dir.path()).await.unwrap();

    let restored = AppState::new(Options::default());
    restored.load(dir.path()).unwrap();
    let api = Api::with(restored);
    assert!((api.mean(&s, "p").await - 11.0 / 1002.0).abs() < 1e-4);
    let fresh = api.scenario(json!({ "model": "pfd" })).await;
    assert_ne!(fresh, s);
}
