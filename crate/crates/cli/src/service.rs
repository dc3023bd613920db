//! HTTP scenario service. Scenarios live in memory; each holds evidence and
//! interventions over a model plus a posterior cache that any mutation
//! clears. Mutations of one scenario are serialized by its lock.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, put};
use axum::{Json, Router};
use psi_core::catalog::bundled_examples;
use psi_core::graph::{build_model, CompiledModel, Evidence, InterventionError, ModelSpec, Observation};
use psi_core::inference::{infer, DiscretizationConfig, InferenceError};
use psi_core::io::{parse_model, IoError, LoadOptions};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

pub const SNAPSHOT_FILE: &str = "scenarios.json";

#[derive(Debug, Clone)]
pub struct Options {
    pub config: DiscretizationConfig,
    pub timeout: Duration,
    /// Snapshot directory; restored on start, written on shutdown.
    pub persist: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        Options { config: DiscretizationConfig::default(), timeout: Duration::from_secs(30), persist: None }
    }
}

/// Error body: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), detail: Value::Null }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation_error", message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} '{id}'")).with_detail(json!({ what: id }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        let message = e.to_string();
        match e {
            InferenceError::ZeroProbabilityEvidence { log_evidence } => {
                ApiError::new(StatusCode::CONFLICT, "zero_probability_evidence", message)
                    .with_detail(json!({ "log_evidence": log_evidence }))
            }
            InferenceError::Domain { node, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "domain_error", message).with_detail(json!({ "node": node }))
            }
            InferenceError::InvalidEvidence { node, .. } => ApiError::bad_request(message).with_detail(json!({ "node": node })),
            InferenceError::UnknownNode(node) => ApiError::bad_request(message).with_detail(json!({ "node": node })),
            _ => ApiError::bad_request(message),
        }
    }
}

impl From<InterventionError> for ApiError {
    fn from(e: InterventionError) -> Self {
        let message = e.to_string();
        match e {
            InterventionError::ValueOutOfDomain { node, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "domain_error", message).with_detail(json!({ "node": node }))
            }
            _ => ApiError::bad_request(message),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Bundled,
    Uploaded,
}

struct ModelEntry {
    id: String,
    source: Source,
    spec: ModelSpec,
    compiled: CompiledModel,
}

impl ModelEntry {
    fn summary(&self) -> Value {
        json!({
            "id": self.id,
            "title": self.spec.title,
            "description": self.spec.metadata.get("description").cloned().unwrap_or(Value::Null),
            "source": self.source,
            "nodes": self.spec.nodes.len(),
        })
    }

    fn check_node(&self, node: &str) -> ApiResult<()> {
        match self.compiled.index_of(node) {
            Some(_) => Ok(()),
            None => Err(ApiError::bad_request(format!("model '{}' has no node '{node}'", self.id)).with_detail(json!({ "node": node }))),
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub model: String,
    #[serde(default)]
    pub evidence: Evidence,
    #[serde(default)]
    pub interventions: BTreeMap<String, Observation>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub updated_at: u64,
    #[serde(skip)]
    cache: Option<Arc<Value>>,
}

impl Scenario {
    fn touch(&mut self) {
        self.cache = None;
        self.updated_at = now();
    }

    fn view(&self) -> Value {
        json!({
            "id": self.id,
            "model": self.model,
            "evidence": self.evidence,
            "interventions": self.interventions,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "cached": self.cache.is_some(),
        })
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Snapshot {
    #[serde(default)]
    models: BTreeMap<String, ModelSpec>,
    #[serde(default)]
    scenarios: Vec<Scenario>,
    #[serde(default)]
    next_id: u64,
}

struct Inner {
    options: Options,
    models: RwLock<BTreeMap<String, Arc<ModelEntry>>>,
    scenarios: RwLock<BTreeMap<String, Arc<Mutex<Scenario>>>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// State with every bundled example registered under its id.
    pub fn new(options: Options) -> Self {
        let mut models = BTreeMap::new();
        for ex in bundled_examples() {
            let compiled = build_model(ex.spec.clone()).expect("bundled models build");
            let entry = ModelEntry { id: ex.id.to_string(), source: Source::Bundled, spec: ex.spec, compiled };
            models.insert(entry.id.clone(), Arc::new(entry));
        }
        AppState(Arc::new(Inner {
            options,
            models: RwLock::new(models),
            scenarios: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        }))
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.0.next_id.fetch_add(1, Ordering::Relaxed))
    }

    /// Full id, or the short prefix of a bundled id (`fig4b`).
    fn model(&self, id: &str) -> ApiResult<Arc<ModelEntry>> {
        let models = self.0.models.read().unwrap();
        models
            .get(id)
            .or_else(|| models.values().find(|m| m.source == Source::Bundled && m.id.split('_').next() == Some(id)))
            .cloned()
            .ok_or_else(|| ApiError::not_found("model", id))
    }

    fn scenario(&self, id: &str) -> ApiResult<Arc<Mutex<Scenario>>> {
        self.0.scenarios.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("scenario", id))
    }

    fn add_model(&self, id: String, source: Source, spec: ModelSpec) -> ApiResult<Arc<ModelEntry>> {
        let compiled =
            build_model(spec.clone()).map_err(|e| ApiError::bad_request(format!("model does not build: {e}")))?;
        let entry = Arc::new(ModelEntry { id: id.clone(), source, spec, compiled });
        let mut models = self.0.models.write().unwrap();
        if models.contains_key(&id) {
            return Err(ApiError::bad_request(format!("model id '{id}' is taken")).with_detail(json!({ "model": id })));
        }
        models.insert(id, entry.clone());
        Ok(entry)
    }

    /// Writes uploaded models and all scenarios to `dir`.
    pub async fn save(&self, dir: &Path) -> std::io::Result<()> {
        let models = self
            .0
            .models
            .read()
            .unwrap()
            .values()
            .filter(|m| m.source == Source::Uploaded)
            .map(|m| (m.id.clone(), m.spec.clone()))
            .collect();
        let handles: Vec<_> = self.0.scenarios.read().unwrap().values().cloned().collect();
        let mut scenarios = Vec::with_capacity(handles.len());
        for h in handles {
            scenarios.push(h.lock().await.clone());
        }
        let snap = Snapshot { models, scenarios, next_id: self.0.next_id.load(Ordering::Relaxed) };
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&snap).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(SNAPSHOT_FILE), text)
    }

    /// Restores a snapshot written by [`AppState::save`]; a missing file is not an error.
    pub fn load(&self, dir: &Path) -> std::io::Result<()> {
        let path = dir.join(SNAPSHOT_FILE);
        if !path.exists() {
            return Ok(());
        }
        let snap: Snapshot = serde_json::from_str(&std::fs::read_to_string(&path)?).map_err(std::io::Error::other)?;
        for (id, spec) in snap.models {
            self.add_model(id, Source::Uploaded, spec).map_err(|e| std::io::Error::other(e.message))?;
        }
        let mut scenarios = self.0.scenarios.write().unwrap();
        for s in snap.scenarios {
            scenarios.insert(s.id.clone(), Arc::new(Mutex::new(s)));
        }
        self.0.next_id.fetch_max(snap.next_id, Ordering::Relaxed);
        Ok(())
    }

    /// Posterior body for a scenario, from cache when nothing changed.
    async fn posteriors(&self, id: &str) -> ApiResult<(String, Arc<Value>)> {
        let handle = self.scenario(id)?;
        let mut sc = handle.lock().await;
        if let Some(body) = &sc.cache {
            return Ok((sc.model.clone(), body.clone()));
        }
        let entry = self.model(&sc.model)?;
        let (evidence, interventions) = (sc.evidence.clone(), sc.interventions.clone());
        let config = self.0.options.config.clone();
        let scenario_id = sc.id.clone();
        let task = tokio::task::spawn_blocking(move || compute(&entry, &scenario_id, &evidence, &interventions, &config));
        let body = match tokio::time::timeout(self.0.options.timeout, task).await {
            Err(_) => {
                let secs = self.0.options.timeout.as_secs_f64();
                return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "timeout", format!("inference exceeded {secs} s"))
                    .with_detail(json!({ "timeout_seconds": secs })));
            }
            Ok(Err(e)) => return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())),
            Ok(Ok(r)) => Arc::new(r?),
        };
        sc.cache = Some(body.clone());
        Ok((sc.model.clone(), body))
    }
}

/// Interventions are applied first; evidence on an intervened node is dropped.
fn compute(
    entry: &ModelEntry,
    scenario: &str,
    evidence: &Evidence,
    interventions: &BTreeMap<String, Observation>,
    config: &DiscretizationConfig,
) -> ApiResult<Value> {
    let mut model = entry.compiled.clone();
    for (node, value) in interventions {
        model = model.intervene(node, value)?;
    }
    let evidence: Evidence = evidence.iter().filter(|(k, _)| !interventions.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
    let ps = infer(&model, &evidence, config)?;
    let warnings: Vec<&str> = ps.warnings.iter().map(|w| w.message.as_str()).collect();
    Ok(json!({
        "scenario": scenario,
        "model": entry.id,
        "converged": ps.converged,
        "iterations": ps.iterations,
        "log_evidence": ps.log_evidence,
        "warnings": warnings,
        "nodes": ps.nodes,
    }))
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::bad_request(format!("invalid request body: {e}")).with_detail(json!({ "line": e.line(), "column": e.column() }))
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/models", get(list_models).post(upload_model))
        .route("/api/models/{model}/graph", get(graph))
        .route("/api/scenarios", post(create_scenario))
        .route("/api/scenarios/{scenario}", get(get_scenario))
        .route("/api/scenarios/{scenario}/evidence", put(replace_evidence))
        .route("/api/scenarios/{scenario}/evidence/{node}", patch(patch_evidence))
        .route("/api/scenarios/{scenario}/interventions", post(add_intervention))
        .route("/api/scenarios/{scenario}/posteriors", get(posteriors))
        .route("/api/compare", post(compare))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

async fn list_models(State(state): State<AppState>) -> Json<Value> {
    let models: Vec<Value> = state.0.models.read().unwrap().values().map(|m| m.summary()).collect();
    Json(Value::Array(models))
}

#[derive(Deserialize)]
struct UploadQuery {
    id: Option<String>,
}

async fn upload_model(State(state): State<AppState>, Query(q): Query<UploadQuery>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let loaded = parse_model(text, LoadOptions::default()).map_err(|e| {
        let detail = match &e {
            IoError::Parse { line, column, .. } => json!({ "line": line, "column": column }),
            IoError::StrictKey { path } => json!({ "key": path }),
            _ => Value::Null,
        };
        ApiError::bad_request(e.to_string()).with_detail(detail)
    })?;
    let id = q.id.unwrap_or_else(|| state.fresh_id("model"));
    let entry = state.add_model(id, Source::Uploaded, loaded.spec)?;
    Ok((StatusCode::CREATED, Json(entry.summary())))
}

async fn graph(State(state): State<AppState>, UrlPath(model): UrlPath<String>) -> ApiResult<Json<Value>> {
    let entry = state.model(&model)?;
    let nodes = entry.compiled.nodes();
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut edges = Vec::new();
    let node_views: Vec<Value> = nodes
        .iter()
        .map(|n| {
            if let Some(g) = &n.group {
                groups.entry(g.as_str()).or_default().push(n.id.as_str());
            }
            let parents: Vec<&str> = n.parents.iter().map(|&p| nodes[p].id.as_str()).collect();
            edges.extend(parents.iter().map(|p| json!({ "from": p, "to": n.id })));
            json!({
                "id": n.id,
                "kind": n.kind,
                "states": n.states,
                "parents": parents,
                "group": n.group,
                "support": n.support,
                "observed": entry.spec.observations.get(&n.id),
            })
        })
        .collect();
    let groups: Vec<Value> = groups.into_iter().map(|(name, members)| json!({ "name": name, "nodes": members })).collect();
    Ok(Json(json!({ "id": entry.id, "title": entry.spec.title, "nodes": node_views, "edges": edges, "groups": groups })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewScenario {
    model: String,
    #[serde(default)]
    evidence: Evidence,
    #[serde(default)]
    interventions: BTreeMap<String, Observation>,
}

async fn create_scenario(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: NewScenario = parse_body(&body)?;
    let entry = state.model(&req.model)?;
    for node in req.evidence.keys() {
        entry.check_node(node)?;
    }
    for (node, value) in &req.interventions {
        entry.compiled.intervene(node, value)?;
    }
    let t = now();
    let sc = Scenario {
        id: state.fresh_id("scenario"),
        model: entry.id.clone(),
        evidence: req.evidence,
        interventions: req.interventions,
        created_at: t,
        updated_at: t,
        cache: None,
    };
    let view = sc.view();
    state.0.scenarios.write().unwrap().insert(sc.id.clone(), Arc::new(Mutex::new(sc)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_scenario(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let handle = state.scenario(&id)?;
    let sc = handle.lock().await;
    Ok(Json(sc.view()))
}

async fn replace_evidence(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let evidence: Evidence = parse_body(&body)?;
    let handle = state.scenario(&id)?;
    let mut sc = handle.lock().await;
    let entry = state.model(&sc.model)?;
    for node in evidence.keys() {
        entry.check_node(node)?;
    }
    sc.evidence = evidence;
    sc.touch();
    Ok(Json(sc.view()))
}

/// Body is an observation (`10`, `"True"`, `[lo, hi]`), optionally wrapped
/// as `{"value": ...}`; `null` clears the node.
async fn patch_evidence(
    State(state): State<AppState>,
    UrlPath((id, node)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let raw: Value = if body.is_empty() { Value::Null } else { parse_body(&body)? };
    let raw = match raw {
        Value::Object(mut o) if o.len() == 1 && o.contains_key("value") => o.remove("value").unwrap_or(Value::Null),
        v => v,
    };
    let value: Option<Observation> =
        serde_json::from_value(raw).map_err(|e| ApiError::bad_request(format!("invalid observation: {e}")))?;
    let handle = state.scenario(&id)?;
    let mut sc = handle.lock().await;
    state.model(&sc.model)?.check_node(&node)?;
    match value {
        Some(v) => sc.evidence.insert(node, v),
        None => sc.evidence.remove(&node),
    };
    sc.touch();
    Ok(Json(sc.view()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Intervention {
    node: String,
    /// `null` removes the intervention.
    value: Option<Observation>,
}

async fn add_intervention(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: Intervention = parse_body(&body)?;
    let handle = state.scenario(&id)?;
    let mut sc = handle.lock().await;
    let entry = state.model(&sc.model)?;
    match req.value {
        Some(v) => {
            entry.compiled.intervene(&req.node, &v)?;
            sc.interventions.insert(req.node, v);
        }
        None => {
            entry.check_node(&req.node)?;
            sc.interventions.remove(&req.node);
        }
    }
    sc.touch();
    Ok(Json(sc.view()))
}

#[derive(Deserialize)]
struct NodesQuery {
    nodes: Option<String>,
}

fn node_list(text: Option<&str>) -> Vec<String> {
    text.into_iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Keeps only `nodes` in a posterior body; unknown names are rejected.
fn select(body: &Value, nodes: &[String]) -> ApiResult<Value> {
    if nodes.is_empty() {
        return Ok(body.clone());
    }
    let all = body["nodes"].as_object().cloned().unwrap_or_default();
    let mut picked = serde_json::Map::new();
    for n in nodes {
        let v = all.get(n).ok_or_else(|| ApiError::bad_request(format!("no posterior for node '{n}'")).with_detail(json!({ "node": n })))?;
        picked.insert(n.clone(), v.clone());
    }
    let mut out = body.clone();
    out["nodes"] = Value::Object(picked);
    Ok(out)
}

async fn posteriors(State(state): State<AppState>, UrlPath(id): UrlPath<String>, Query(q): Query<NodesQuery>) -> ApiResult<Json<Value>> {
    let (_, body) = state.posteriors(&id).await?;
    Ok(Json(select(&body, &node_list(q.nodes.as_deref()))?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareRequest {
    #[serde(rename = "scenarioA")]
    a: String,
    #[serde(rename = "scenarioB")]
    b: String,
    #[serde(default)]
    nodes: Vec<String>,
}

fn summary(p: &Value) -> Value {
    json!({ "mean": p["mean"], "variance": p["variance"], "states": p.get("states").cloned().unwrap_or(Value::Null) })
}

/// Per-node deltas, computed as B minus A.
async fn compare(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: CompareRequest = parse_body(&body)?;
    let (model_a, a) = state.posteriors(&req.a).await?;
    let (model_b, b) = state.posteriors(&req.b).await?;
    if model_a != model_b {
        return Err(ApiError::bad_request("scenarios use different models")
            .with_detail(json!({ "scenarioA": model_a, "scenarioB": model_b })));
    }
    let (a, b) = (select(&a, &req.nodes)?, select(&b, &req.nodes)?);
    let mut nodes = serde_json::Map::new();
    for (id, pa) in a["nodes"].as_object().into_iter().flatten() {
        let Some(pb) = b["nodes"].get(id) else { continue };
        let num = |v: &Value, k: &str| v[k].as_f64().unwrap_or(f64::NAN);
        let mut entry = json!({
            "a": summary(pa),
            "b": summary(pb),
            "delta_mean": num(pb, "mean") - num(pa, "mean"),
            "delta_variance": num(pb, "variance") - num(pa, "variance"),
        });
        let states = |p: &Value| -> BTreeMap<String, f64> {
            p["states"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|s| Some((s["state"].as_str()?.to_string(), s["probability"].as_f64()?)))
                .collect()
        };
        let (sa, sb) = (states(pa), states(pb));
        if !sa.is_empty() {
            let deltas: BTreeMap<&String, f64> = sa.iter().map(|(k, v)| (k, sb.get(k).copied().unwrap_or(0.0) - v)).collect();
            entry["delta_states"] = json!(deltas);
        }
        nodes.insert(id.clone(), entry);
    }
    Ok(Json(json!({ "scenarioA": req.a, "scenarioB": req.b, "model": model_a, "nodes": nodes })))
}

/// Serves until Ctrl-C, then writes the snapshot when `--persist` is set.
pub async fn serve(addr: SocketAddr, options: Options) -> std::io::Result<()> {
    let persist = options.persist.clone();
    let state = AppState::new(options);
    if let Some(dir) = &persist {
        state.load(dir)?;
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(dir) = &persist {
        state.save(dir).await?;
    }
    Ok(())
}
