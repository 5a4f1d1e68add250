//! JSON-over-HTTP curation service.
//!
//! Readers share the loaded workspace; override writes go through a single
//! writer lock and are persisted before the in-memory state changes.
//! Analyses are recomputed only on `POST /api/recompute`, which runs as a
//! background job polled through `GET /api/jobs/{id}`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use palate::axes::{self, DimensionReport, PolePlane, Transform};
use palate::corpus::LabelKind;
use palate::culture::{self, ProfileReport, PurityReport};
use palate::curation::{
    apply_overrides, consolidate, variant_noise, AuditEntry, Baseline, ConsolidationMap, OverrideAction, OverrideSet,
};
use palate::stats::Seed;

use crate::workspace::Workspace;

pub const HASH_HEADER: &str = "x-manifest-hash";

#[derive(Debug, Clone, Serialize)]
pub struct Member {
    pub id: i64,
    pub name: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupView {
    pub canonical_id: i64,
    pub name: String,
    pub categories: Vec<String>,
    pub members: Vec<Member>,
    pub variant_count: usize,
    /// Pairwise cosine statistics; absent for single-member groups.
    pub mean_cosine: Option<f64>,
    pub min_cosine: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupsView {
    pub group_count: usize,
    pub groups: Vec<GroupView>,
    pub baseline: Option<Baseline>,
    pub removed: Vec<i64>,
}

struct Curation {
    overrides: OverrideSet,
    map: ConsolidationMap,
    hash: String,
    groups: GroupsView,
}

#[derive(Debug, Clone, Serialize)]
struct CultureView {
    purity: Option<PurityReport>,
    profiles: Option<ProfileReport>,
    errors: Vec<String>,
}

struct Analyses {
    hash: String,
    dimensions: BTreeMap<String, std::result::Result<DimensionReport, String>>,
    culture: Option<CultureView>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum Job {
    Running,
    Done { manifest_hash: String },
    Failed { error: String },
}

pub struct AppState {
    ws: Workspace,
    curation: RwLock<Curation>,
    writer: Mutex<()>,
    analyses: RwLock<Analyses>,
    jobs: Mutex<Vec<Job>>,
    token: Option<String>,
}

fn groups_view(ws: &Workspace, map: &ConsolidationMap) -> Result<GroupsView> {
    let seed = Seed::new(ws.manifest.seed).derive("noise");
    let noise = match variant_noise(&ws.raw, map, usize::MAX, seed) {
        Ok(r) => Some(r),
        Err(palate::Error::Degenerate(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let stats: BTreeMap<i64, (f64, f64)> = noise
        .iter()
        .flat_map(|r| r.groups.iter().map(|g| (g.canonical_id, (g.mean_cosine, g.min_cosine))))
        .collect();
    let groups: Vec<GroupView> = map
        .groups()
        .into_iter()
        .filter(|(_, members)| !members.is_empty())
        .map(|(cid, members)| {
            let canonical = map.canonical(cid).expect("group ids come from the catalog");
            let s = stats.get(&cid);
            GroupView {
                canonical_id: cid,
                name: canonical.name.clone(),
                categories: canonical.categories.clone(),
                variant_count: members.len(),
                members: members
                    .iter()
                    .map(|id| Member {
                        id: *id,
                        name: map.entries()[id].original_name.clone(),
                    })
                    .collect(),
                mean_cosine: s.map(|s| s.0),
                min_cosine: s.map(|s| s.1),
            }
        })
        .collect();
    Ok(GroupsView {
        group_count: groups.len(),
        groups,
        baseline: noise.and_then(|r| r.baseline),
        removed: map.removed(),
    })
}

fn compute_analyses(ws: &Workspace, map: &ConsolidationMap, hash: String) -> Result<Analyses> {
    let curated = consolidate(&ws.raw, map)?;
    let dimensions = ws
        .labels
        .iter()
        .map(|(name, labels)| {
            // Labels of canonicals merged away or removed by overrides no longer resolve.
            let present = labels.filtered(|n| curated.row_of_name(n).is_some());
            let dropped = labels.len() - present.len();
            let r = axes::evaluate(&curated, &present, Transform::Identity)
                .map(|mut report| {
                    if dropped > 0 {
                        report.notes.push(format!("{dropped} labeled names are not in the curated vocabulary"));
                    }
                    report
                })
                .map_err(|e| e.to_string());
            (name.clone(), r)
        })
        .collect();
    let culture = ws.tags.as_ref().map(|all| {
        let mut errors = Vec::new();
        let mut tags = all.clone();
        tags.tags.retain(|n, _| curated.row_of_name(n).is_some());
        let tags = &tags;
        let purity = culture::knn_purity(&curated, tags, ws.manifest.k)
            .map_err(|e| errors.push(format!("purity: {e}")))
            .ok();
        let mut built = Vec::new();
        for (name, labels) in &ws.labels {
            if !matches!(labels.kind, LabelKind::Ordinal | LabelKind::Binary) {
                continue;
            }
            let present = labels.filtered(|n| curated.row_of_name(n).is_some());
            match axes::AxisRecipe::for_labels(labels).and_then(|r| axes::build_axis(&curated, &present, r)) {
                Ok(a) => built.push(a),
                Err(e) => errors.push(format!("axis {name}: {e}")),
            }
        }
        let profiles = if built.is_empty() {
            None
        } else {
            let seed = Seed::new(ws.manifest.seed).derive("profiles");
            culture::cuisine_profiles(&curated, tags, &built, ws.manifest.n_perm, seed)
                .map_err(|e| errors.push(format!("profiles: {e}")))
                .ok()
        };
        CultureView {
            purity,
            profiles,
            errors,
        }
    });
    Ok(Analyses {
        hash,
        dimensions,
        culture,
    })
}

impl AppState {
    /// Loads the workspace, replays its override log, and runs the initial
    /// analyses.
    pub fn load(root: &Path, token: Option<String>) -> Result<Arc<Self>> {
        let ws = Workspace::open(root)?;
        let overrides = ws.load_overrides()?;
        let (map, _) = apply_overrides(&ws.base_map, &overrides).context("replaying the override log")?;
        let hash = ws.manifest_hash()?;
        let groups = groups_view(&ws, &map)?;
        let analyses = compute_analyses(&ws, &map, hash.clone())?;
        Ok(Arc::new(Self {
            curation: RwLock::new(Curation {
                overrides,
                map,
                hash,
                groups,
            }),
            ws,
            writer: Mutex::new(()),
            analyses: RwLock::new(analyses),
            jobs: Mutex::new(Vec::new()),
            token,
        }))
    }

    fn hash(&self) -> String {
        self.curation.read().hash.clone()
    }
}

fn envelope(hash: &str, status: StatusCode, body: Value) -> Response {
    let mut resp = (status, Json(body)).into_response();
    if let Ok(v) = HeaderValue::from_str(hash) {
        resp.headers_mut().insert(HASH_HEADER, v);
    }
    resp
}

fn ok<T: Serialize>(hash: &str, data: T) -> Response {
    match serde_json::to_value(data) {
        Ok(data) => envelope(hash, StatusCode::OK, json!({"manifest_hash": hash, "data": data})),
        Err(e) => error(hash, StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn error(hash: &str, status: StatusCode, reason: impl Into<String>) -> Response {
    envelope(hash, status, json!({"manifest_hash": hash, "error": reason.into()}))
}

async fn auth(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let expected = format!("Bearer {token}");
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return error(&state.hash(), StatusCode::UNAUTHORIZED, "missing or wrong bearer token");
        }
    }
    next.run(req).await
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let hash = state.hash();
    ok(&hash, json!({"status": "ok", "entities": state.ws.raw.len()}))
}

#[derive(Serialize)]
struct Ingredient<'a> {
    id: i64,
    name: &'a str,
    canonical_id: Option<i64>,
    canonical_name: Option<&'a str>,
    categories: &'a [String],
    tags: &'a [String],
}

async fn ingredients(State(state): State<Arc<AppState>>) -> Response {
    let cur = state.curation.read();
    let map = &cur.map;
    let none: &[String] = &[];
    let list: Vec<Ingredient> = state
        .ws
        .raw
        .entities()
        .iter()
        .map(|e| {
            let cid = map.entries().get(&e.id).and_then(|m| m.canonical_id);
            let canonical = cid.and_then(|c| map.canonical(c));
            let tags = canonical
                .and_then(|c| state.ws.tags.as_ref().and_then(|t| t.tags.get(&c.name)))
                .map_or(none, Vec::as_slice);
            Ingredient {
                id: e.id,
                name: &e.name,
                canonical_id: cid,
                canonical_name: canonical.map(|c| c.name.as_str()),
                categories: canonical.map_or(none, |c| c.categories.as_slice()),
                tags,
            }
        })
        .collect();
    ok(&cur.hash, list)
}

#[derive(Debug, Default, Deserialize)]
struct GroupQuery {
    /// Case-insensitive substring of the canonical or a member name.
    q: Option<String>,
    /// `severity` orders by minimum pairwise cosine, lowest first.
    sort: Option<String>,
}

fn filtered(view: &GroupsView, query: &GroupQuery) -> std::result::Result<GroupsView, String> {
    let mut groups = view.groups.clone();
    if let Some(q) = query.q.as_deref().map(str::to_lowercase).filter(|q| !q.is_empty()) {
        groups.retain(|g| {
            g.name.to_lowercase().contains(&q) || g.members.iter().any(|m| m.name.to_lowercase().contains(&q))
        });
    }
    match query.sort.as_deref() {
        None | Some("id") => {}
        Some("severity") => groups.sort_by(|a, b| match (a.min_cosine, b.min_cosine) {
            (Some(x), Some(y)) => x.total_cmp(&y).then(a.canonical_id.cmp(&b.canonical_id)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.canonical_id.cmp(&b.canonical_id),
        }),
        Some(other) => return Err(format!("unknown sort {other:?}; use `id` or `severity`")),
    }
    Ok(GroupsView {
        group_count: groups.len(),
        groups,
        baseline: view.baseline.clone(),
        removed: view.removed.clone(),
    })
}

async fn groups(State(state): State<Arc<AppState>>, Query(query): Query<GroupQuery>) -> Response {
    let cur = state.curation.read();
    match filtered(&cur.groups, &query) {
        Ok(v) => ok(&cur.hash, v),
        Err(e) => error(&cur.hash, StatusCode::BAD_REQUEST, e),
    }
}

/// Accepts one action object or `{"actions": [...]}`.
fn parse_actions(body: &[u8]) -> std::result::Result<Vec<OverrideAction>, String> {
    let value: Value = serde_json::from_slice(body).map_err(|e| format!("body is not JSON: {e}"))?;
    let actions = if value.get("actions").is_some() {
        serde_json::from_value::<OverrideSet>(value).map_err(|e| format!("malformed override set: {e}"))?.actions
    } else {
        vec![serde_json::from_value::<OverrideAction>(value).map_err(|e| format!("malformed override action: {e}"))?]
    };
    if actions.is_empty() {
        return Err("no actions given".into());
    }
    Ok(actions)
}

#[derive(Serialize)]
struct OverrideResult {
    applied: Vec<AuditEntry>,
    log_length: usize,
    groups: GroupsView,
}

fn commit(state: &AppState, actions: Vec<OverrideAction>) -> std::result::Result<OverrideResult, (StatusCode, String)> {
    let _writer = state.writer.lock();
    let mut set = state.curation.read().overrides.clone();
    let first = set.actions.len();
    set.actions.extend(actions);
    let (map, audit) =
        apply_overrides(&state.ws.base_map, &set).map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))?;
    let internal = |e: anyhow::Error| (StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}"));
    let groups = groups_view(&state.ws, &map).map_err(internal)?;
    state.ws.save_overrides(&set).map_err(internal)?;
    let hash = state.ws.manifest_hash().map_err(internal)?;
    let log_length = set.actions.len();
    *state.curation.write() = Curation {
        overrides: set,
        map,
        hash,
        groups: groups.clone(),
    };
    Ok(OverrideResult {
        applied: audit.into_iter().skip(first).collect(),
        log_length,
        groups,
    })
}

async fn post_overrides(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let actions = match parse_actions(&body) {
        Ok(a) => a,
        Err(e) => return error(&state.hash(), StatusCode::BAD_REQUEST, e),
    };
    let worker = state.clone();
    match tokio::task::spawn_blocking(move || commit(&worker, actions)).await {
        Ok(Ok(result)) => ok(&state.hash(), result),
        Ok(Err((status, reason))) => error(&state.hash(), status, reason),
        Err(e) => error(&state.hash(), StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn dimension(State(state): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Response {
    let hash = state.hash();
    if !state.ws.labels.contains_key(&name) {
        return error(&hash, StatusCode::NOT_FOUND, format!("unknown dimension {name:?}"));
    }
    let analyses = state.analyses.read();
    match &analyses.dimensions[&name] {
        Ok(report) => ok(&hash, json!({"report": report, "stale": analyses.hash != hash})),
        Err(e) => error(&hash, StatusCode::UNPROCESSABLE_ENTITY, e.clone()),
    }
}

async fn culture_view(State(state): State<Arc<AppState>>) -> Response {
    let hash = state.hash();
    let analyses = state.analyses.read();
    match &analyses.culture {
        Some(c) => ok(&hash, json!({"culture": c, "stale": analyses.hash != hash})),
        None => error(&hash, StatusCode::NOT_FOUND, "the workspace has no cuisine tags"),
    }
}

#[derive(Serialize)]
struct Point<'a> {
    id: i64,
    name: String,
    xyz: [f64; 3],
    categories: &'a [String],
    tags: &'a [String],
}

#[derive(Serialize)]
struct Projection<'a> {
    points: Vec<Point<'a>>,
    pole_plane: Option<PolePlane>,
    cuisine_centroids: BTreeMap<String, [f64; 3]>,
}

async fn projection3d(State(state): State<Arc<AppState>>) -> Response {
    let cur = state.curation.read();
    let Some(coords) = &state.ws.coords else {
        return error(&cur.hash, StatusCode::NOT_FOUND, "the workspace has no 3D coordinates");
    };
    let none: &[String] = &[];
    let mut sums: BTreeMap<String, ([f64; 3], usize)> = BTreeMap::new();
    let points: Vec<Point> = coords
        .iter()
        .map(|(&id, &xyz)| {
            let canonical = cur.map.canonical(id);
            let name = match canonical {
                Some(c) => c.name.clone(),
                None => state.ws.raw.row_of_id(id).map(|r| state.ws.raw.entity(r).name.clone()).unwrap_or_default(),
            };
            let tags = state.ws.tags.as_ref().and_then(|t| t.tags.get(&name)).map_or(none, Vec::as_slice);
            for t in tags {
                let e = sums.entry(t.clone()).or_insert(([0.0; 3], 0));
                for k in 0..3 {
                    e.0[k] += xyz[k];
                }
                e.1 += 1;
            }
            Point {
                id,
                name,
                xyz,
                categories: canonical.map_or(none, |c| c.categories.as_slice()),
                tags,
            }
        })
        .collect();
    let pole_plane = if state.ws.manifest.sweet.is_empty() || state.ws.manifest.savoury.is_empty() {
        None
    } else {
        match axes::pole_plane_projection(coords, &state.ws.manifest.sweet, &state.ws.manifest.savoury) {
            Ok(p) => Some(p),
            Err(e) => return error(&cur.hash, StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        }
    };
    let cuisine_centroids = sums
        .into_iter()
        .map(|(t, (s, n))| (t, s.map(|v| v / n as f64)))
        .collect();
    ok(
        &cur.hash,
        Projection {
            points,
            pole_plane,
            cuisine_centroids,
        },
    )
}

async fn recompute(State(state): State<Arc<AppState>>) -> Response {
    let (map, hash) = {
        let cur = state.curation.read();
        (cur.map.clone(), cur.hash.clone())
    };
    let id = {
        let mut jobs = state.jobs.lock();
        jobs.push(Job::Running);
        jobs.len() - 1
    };
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = compute_analyses(&worker.ws, &map, hash.clone());
        let job = match outcome {
            Ok(a) => {
                *worker.analyses.write() = a;
                Job::Done { manifest_hash: hash }
            }
            Err(e) => Job::Failed { error: format!("{e:#}") },
        };
        worker.jobs.lock()[id] = job;
    });
    envelope(
        &state.hash(),
        StatusCode::ACCEPTED,
        json!({"manifest_hash": state.hash(), "data": {"job_id": id, "status": "running"}}),
    )
}

async fn job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<usize>) -> Response {
    let hash = state.hash();
    match state.jobs.lock().get(id) {
        Some(j) => ok(&hash, json!({"job_id": id, "job": j})),
        None => error(&hash, StatusCode::NOT_FOUND, format!("unknown job {id}")),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let guarded = Router::new()
        .route("/api/ingredients", get(ingredients))
        .route("/api/groups", get(groups))
        .route("/api/overrides", post(post_overrides))
        .route("/api/dimensions/{name}", get(dimension))
        .route("/api/culture", get(culture_view))
        .route("/api/projection3d", get(projection3d))
        .route("/api/recompute", post(recompute))
        .route("/api/jobs/{id}", get(job))
        .route_layer(middleware::from_fn_with_state(state.clone(), auth));
    Router::new()
        .route("/api/health", get(health))
        .merge(guarded)
        .with_state(state)
}

pub fn serve(root: &Path, bind: SocketAddr, token_env: Option<&str>) -> Result<()> {
    let token = token_env
        .map(|var| std::env::var(var).with_context(|| format!("environment variable {var} is not set")))
        .transpose()?;
    let state = AppState::load(root, token)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
        eprintln!("serving {} on http://{}", root.display(), listener.local_addr()?);
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}
