use std::collections::BTreeSet;
use std::path::Path as FsPath;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use taxa_core::assist::{cluster_taxon, ClusterPartition};
use taxa_core::compare::{
    agreement_report, dissensus_images, majority_merge, shared_images, union_merge, unsure_images,
    AnnotatedMergedTree, MajorityMerge, MetricsReport,
};
use taxa_core::model::{CoderSession, ImageFilter, ImageLocation, LabelAssignment, Labeling, Op, TaxonPath, TaxonomyTree};
use taxa_core::persist::{encode_majority, load_session, save_session};
use taxa_core::predict::{similarity_predict, zero_shot_predict, ProbabilityRow, DEFAULT_THRESHOLD};

use crate::error::ApiError;
use crate::state::{valid_session_id, AppState};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn api_router() -> Router<Arc<AppState>> {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/ops", post(mutate))
        .route("/api/sessions/{id}/images", get(images))
        .route("/api/sessions/{id}/assist/divide", post(divide))
        .route("/api/compare", post(compare))
        .route("/api/merge/majority", post(merge_majority))
        .route("/api/predict", post(predict))
        .route("/api/images/{uuid}/file", get(image_file))
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn session_doc(s: &CoderSession) -> Value {
    serde_json::from_str(&save_session(s)).expect("session documents are JSON")
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    coder_id: String,
    version: u64,
    session: Value,
}

impl SessionView {
    fn of(s: &CoderSession) -> Self {
        Self {
            session_id: s.session_id().to_owned(),
            coder_id: s.coder_id().to_owned(),
            version: s.version(),
            session: session_doc(s),
        }
    }
}

async fn health(State(app): Shared) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "sessions": app.sessions.read().await.len(),
        "images": app.catalog.len(),
        "embeddings": app.embeddings.as_ref().map_or(0, |e| e.len()),
        "captions": app.captions.len(),
    }))
}

async fn list_sessions(State(app): Shared) -> Json<Value> {
    let slots: Vec<_> = app.sessions.read().await.values().cloned().collect();
    let mut out = Vec::with_capacity(slots.len());
    for slot in slots {
        let s = slot.lock().await;
        out.push(json!({ "session_id": s.session_id(), "coder_id": s.coder_id(), "version": s.version() }));
    }
    Json(json!({ "sessions": out }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    coder_id: Option<String>,
    session_id: Option<String>,
    /// An exported session document to import.
    session: Option<Value>,
}

async fn create_session(State(app): Shared, body: Bytes) -> ApiResult<Response> {
    let req: CreateRequest = parse(&body)?;
    let session = match req.session {
        Some(doc) => {
            let s = load_session(doc.to_string().as_bytes())?;
            if req.session_id.as_ref().is_some_and(|id| id != s.session_id())
                || req.coder_id.as_ref().is_some_and(|c| c != s.coder_id())
            {
                return Err(ApiError::bad_request("session_id/coder_id disagree with the imported document"));
            }
            s
        }
        None => {
            let coder = req.coder_id.ok_or_else(|| ApiError::bad_request("coder_id is required"))?;
            let id = req.session_id.unwrap_or_else(|| coder.clone());
            CoderSession::with_id(&id, &coder)?
        }
    };
    if !valid_session_id(session.session_id()) {
        return Err(ApiError::bad_request(format!(
            "session id {:?} must be 1-128 characters of [A-Za-z0-9._-] not starting with '.'",
            session.session_id()
        )));
    }
    let mut sessions = app.sessions.write().await;
    if sessions.contains_key(session.session_id()) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "SessionExists",
            format!("session {:?} already exists", session.session_id()),
        )
        .details(json!({ "session_id": session.session_id() })));
    }
    app.persist(&session).await?;
    let view = SessionView::of(&session);
    sessions.insert(session.session_id().to_owned(), Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(SessionView::of(&app.snapshot(&id).await?)))
}

/// Splits `{"expected_version": n, "op": "...", ...args}` into its parts.
fn envelope(body: &[u8]) -> ApiResult<(u64, Op)> {
    let mut fields: Map<String, Value> = parse(body)?;
    let expected = fields
        .remove("expected_version")
        .ok_or_else(|| ApiError::bad_request("expected_version is required"))?;
    let expected = expected
        .as_u64()
        .ok_or_else(|| ApiError::bad_request("expected_version must be a non-negative integer"))?;
    let op = serde_json::from_value(Value::Object(fields)).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "UnknownOperation", format!("invalid operator: {e}"))
    })?;
    Ok((expected, op))
}

#[derive(Serialize)]
struct MutationResult {
    version: u64,
    op: &'static str,
    tree: TaxonomyTree,
    /// Label assignments the operator added or changed, in load order.
    changed_labels: Vec<LabelAssignment>,
    memos: usize,
}

async fn mutate(State(app): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MutationResult>> {
    let (expected, op) = envelope(&body)?;
    let slot = app.slot(&id).await?;
    let mut session = slot.lock().await;
    if session.version() != expected {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "VersionConflict",
            format!("session is at version {}, request expected {expected}", session.version()),
        )
        .details(json!({
            "current_version": session.version(),
            "expected_version": expected,
            "images": session.image_count(),
            "taxa": session.tree().len(),
        })));
    }
    let kind = op.kind();
    let before = session.clone();
    session.apply(op)?;
    if let Err(e) = app.persist(&session).await {
        *session = before;
        return Err(e);
    }
    let changed_labels = session
        .labels()
        .values()
        .filter(|a| before.labels().get(&a.uuid) != Some(*a))
        .cloned()
        .collect();
    Ok(Json(MutationResult {
        version: session.version(),
        op: kind,
        tree: session.tree().clone(),
        changed_labels,
        memos: session.memos().len(),
    }))
}

#[derive(Deserialize)]
struct ImageQuery {
    taxon: Option<String>,
    q: Option<String>,
    uuid: Option<String>,
}

async fn images(State(app): Shared, Path(id): Path<String>, Query(query): Query<ImageQuery>) -> ApiResult<Json<Value>> {
    let session = app.snapshot(&id).await?;
    let mut filters = Vec::new();
    if let Some(t) = query.taxon.filter(|t| !t.is_empty()) {
        filters.push(ImageFilter::Taxon(TaxonPath::parse(&t)));
    }
    if let Some(q) = query.q.filter(|q| !q.is_empty()) {
        filters.push(ImageFilter::Keyword(q));
    }
    if let Some(u) = query.uuid.filter(|u| !u.is_empty()) {
        filters.push(ImageFilter::Uuid(u));
    }
    let mut keep: Vec<String> = session.labels().keys().cloned().collect();
    for f in &filters {
        let hits: BTreeSet<String> = session.query_images(f, &app.catalog).into_iter().collect();
        keep.retain(|u| hits.contains(u));
    }
    let rows: Vec<Value> = keep
        .iter()
        .map(|u| {
            let a = &session.labels()[u];
            let rec = app.catalog.get(u);
            json!({
                "uuid": u,
                "display_name": rec.and_then(|r| r.display_name.clone()),
                "publish_year": rec.and_then(|r| r.publish_year),
                "paths": a.paths,
                "unsure": a.unsure,
            })
        })
        .collect();
    Ok(Json(json!({ "version": session.version(), "images": rows })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DivideRequest {
    path: TaxonPath,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct DividePreview {
    version: u64,
    partition: ClusterPartition,
    /// Ready-to-send commit envelope, editable by the client.
    commit: Value,
}

async fn divide(State(app): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<DividePreview>> {
    let req: DivideRequest = parse(&body)?;
    let session = app.snapshot(&id).await?;
    let app2 = app.clone();
    let partition = blocking(move || {
        let emb = app2.embeddings.as_ref().ok_or_else(|| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "NoEmbeddings", "the server was started without embeddings")
        })?;
        Ok(cluster_taxon(&session, &req.path, emb, &app2.captions, req.seed)?)
    })
    .await?;
    let version = app.snapshot(&id).await?.version();
    let mut commit = serde_json::to_value(partition.to_op()).expect("ops serialize");
    commit["expected_version"] = json!(version);
    Ok(Json(DividePreview {
        version,
        partition,
        commit,
    }))
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct SessionSelection {
    session_ids: Vec<String>,
    /// Inline session documents, appended after the stored ones.
    sessions: Vec<Value>,
}

#[derive(Deserialize)]
struct CompareRequest {
    #[serde(flatten)]
    selection: SessionSelection,
    depth: Option<usize>,
}

async fn gather(app: &AppState, sel: SessionSelection) -> ApiResult<Vec<CoderSession>> {
    let mut out = Vec::new();
    for id in &sel.session_ids {
        out.push(app.snapshot(id).await?);
    }
    for doc in sel.sessions {
        out.push(load_session(doc.to_string().as_bytes())?);
    }
    if out.is_empty() {
        return Err(ApiError::bad_request("select at least one session"));
    }
    Ok(out)
}

#[derive(Serialize)]
struct CompareResponse {
    coders: Vec<String>,
    warnings: Vec<String>,
    shared_images: Vec<String>,
    union: AnnotatedMergedTree,
    majority: MajorityMerge,
    metrics: Option<MetricsReport>,
    dissensus: Vec<String>,
    unsure: Vec<String>,
}

/// Everything the comparison view shows, computed from immutable snapshots.
pub fn compare_sessions(sessions: &[CoderSession], depth: Option<usize>) -> ApiResult<Value> {
    let union = union_merge(sessions)?;
    let majority = majority_merge(sessions)?;
    let shared = shared_images(sessions);
    let mut warnings = union.warnings.clone();
    let metrics = if sessions.len() < 2 {
        None
    } else if shared.is_empty() {
        warnings.push("the sessions share no images; metrics omitted".into());
        None
    } else {
        Some(agreement_report(sessions, depth)?)
    };
    let shared_set: BTreeSet<&String> = shared.iter().collect();
    let dissensus = dissensus_images(sessions).into_iter().filter(|u| shared_set.contains(u)).collect();
    let resp = CompareResponse {
        coders: union.coders.clone(),
        warnings,
        shared_images: shared.clone(),
        dissensus,
        unsure: unsure_images(sessions),
        union,
        majority,
        metrics,
    };
    Ok(serde_json::to_value(resp).expect("responses serialize"))
}

async fn compare(State(app): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let req: CompareRequest = parse(&body)?;
    if req.depth == Some(0) {
        return Err(ApiError::bad_request("depth must be positive"));
    }
    let sessions = gather(&app, req.selection).await?;
    Ok(Json(blocking(move || compare_sessions(&sessions, req.depth)).await?))
}

async fn merge_majority(State(app): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let sessions = gather(&app, parse(&body)?).await?;
    let doc = blocking(move || Ok(encode_majority(&majority_merge(&sessions)?))).await?;
    Ok(Json(serde_json::from_str(&doc).expect("merge documents are JSON")))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Similarity,
    Zeroshot,
}

#[derive(Deserialize)]
struct PredictRequest {
    method: Method,
    #[serde(flatten)]
    selection: SessionSelection,
    targets: Option<Vec<String>>,
    #[serde(default)]
    rows: Vec<Value>,
    threshold: Option<f64>,
}

/// Labels to match against: the single session's, or the majority vote of
/// several. Images with no majority label are left out.
fn reference_labels(sessions: &[CoderSession]) -> ApiResult<Labeling> {
    let labels = if sessions.len() == 1 {
        sessions[0].labeling()
    } else {
        majority_merge(sessions)?.labels
    };
    Ok(labels.into_iter().filter(|(_, p)| !p.is_empty()).collect())
}

fn parse_rows(rows: Vec<Value>) -> ApiResult<Vec<ProbabilityRow>> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        uuid: String,
        probs: std::collections::BTreeMap<String, f64>,
    }
    rows.into_iter()
        .map(|v| {
            let r: Row = serde_json::from_value(v).map_err(|e| ApiError::bad_request(format!("bad probability row: {e}")))?;
            Ok(ProbabilityRow {
                uuid: r.uuid,
                probs: r.probs.into_iter().map(|(k, p)| (TaxonPath::parse(&k), p)).collect(),
            })
        })
        .collect()
}

async fn predict(State(app): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let req: PredictRequest = parse(&body)?;
    let labels = match req.method {
        Method::Zeroshot => {
            let rows = parse_rows(req.rows)?;
            let threshold = req.threshold.unwrap_or(DEFAULT_THRESHOLD);
            blocking(move || Ok(zero_shot_predict(&rows, threshold)?)).await?
        }
        Method::Similarity => {
            let sessions = gather(&app, req.selection).await?;
            let app2 = app.clone();
            blocking(move || {
                let emb = app2.embeddings.as_ref().ok_or_else(|| {
                    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "NoEmbeddings", "the server was started without embeddings")
                })?;
                let labeled = reference_labels(&sessions)?;
                let targets = req.targets.unwrap_or_else(|| {
                    emb.iter()
                        .map(|(u, _)| u.to_owned())
                        .filter(|u| !labeled.contains_key(u))
                        .collect()
                });
                Ok(similarity_predict(&labeled, emb, &targets)?)
            })
            .await?
        }
    };
    Ok(Json(json!({ "labels": labels })))
}

fn content_type(path: &str) -> &'static str {
    let ext = FsPath::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "svg" => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn image_file(State(app): Shared, Path(uuid): Path<String>) -> ApiResult<Response> {
    let missing = || {
        ApiError::new(StatusCode::NOT_FOUND, "NoSuchImage", format!("no file recorded for image {uuid}"))
            .details(json!({ "uuid": uuid }))
    };
    match app.image_location(&uuid).ok_or_else(missing)? {
        ImageLocation::Local(path) => {
            let bytes = tokio::fs::read(&path).await.map_err(|_| missing())?;
            Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
        }
        ImageLocation::Remote(url) => Ok(Redirect::temporary(&url).into_response()),
    }
}
