//! HTTP API over a data directory.
//!
//! The service keeps no state of its own beyond per-document write locks:
//! every request reads the files written by the CLI, and every mutation
//! rewrites them by atomic rename. Revision tokens are content hashes sent
//! as `ETag`; a mutation carrying `If-Match` with a stale token gets 409.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::header::{CONTENT_TYPE, ETAG, IF_MATCH};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use bounce_core::catalog::load_catalog;
use bounce_core::classifier::{classify, Provenance, ReferenceSet};
use bounce_core::features::FeatureTrajectory;
use bounce_core::pipeline::{segment_track_file, TrackFile};
use bounce_core::segmentation::{attach_airborne, BounceSegment, SegmentsDocument};
use bounce_core::{parse_code, PipelineConfig, SkillCode};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{
    list_routines, read_json, revision_of, valid_id, write_json, RoutinePaths, RoutineRecord,
    LATEST_EVALUATION, REFERENCE_SET_FILE,
};

pub struct AppState {
    data: PathBuf,
    config: PipelineConfig,
    routine_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    refs_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(data: impl Into<PathBuf>, config: PipelineConfig) -> Arc<Self> {
        Arc::new(AppState {
            data: data.into(),
            config,
            routine_locks: Mutex::new(HashMap::new()),
            refs_lock: tokio::sync::Mutex::new(()),
        })
    }

    fn routine_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.routine_locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    fn refs_path(&self) -> PathBuf {
        self.data.join(REFERENCE_SET_FILE)
    }

    fn routine(&self, id: &str) -> Result<RoutinePaths, ApiError> {
        let paths = RoutinePaths::in_data_dir(&self.data, id);
        if !valid_id(id) || !paths.record().is_file() {
            return Err(ApiError::NotFound(format!("no routine `{id}`")));
        }
        Ok(paths)
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict(String),
    Unprocessable(String),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        ApiError::Internal(e)
    }
}

impl From<bounce_core::Error> for ApiError {
    fn from(e: bounce_core::Error) -> Self {
        ApiError::Internal(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(e) => (StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}")),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn read_bytes(path: &Path) -> ApiResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            ApiError::NotFound(format!("{} not found", file_label(path)))
        }
        _ => ApiError::Internal(anyhow::Error::new(e).context(path.display().to_string())),
    })
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn parse<T: for<'de> Deserialize<'de>>(bytes: &[u8], path: &Path) -> ApiResult<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::Internal(anyhow::Error::new(e).context(path.display().to_string())))
}

/// A JSON body with its revision token as `ETag`.
fn tagged<T: Serialize>(value: &T, revision: &str) -> Response {
    let mut resp = Json(value).into_response();
    if let Ok(v) = HeaderValue::from_str(revision) {
        resp.headers_mut().insert(ETAG, v);
    }
    resp
}

/// `If-Match` is optional; when present it must name the current revision.
fn check_if_match(headers: &HeaderMap, current: &str) -> ApiResult<()> {
    let Some(v) = headers.get(IF_MATCH) else {
        return Ok(());
    };
    let v = v.to_str().unwrap_or("").trim();
    if v == "*" || v.split(',').any(|t| t.trim() == current) {
        Ok(())
    } else {
        Err(ApiError::Conflict(format!(
            "stale revision {v}, current is {current}"
        )))
    }
}

fn load_record(paths: &RoutinePaths) -> ApiResult<(RoutineRecord, String)> {
    let bytes = read_bytes(&paths.record())?;
    Ok((parse(&bytes, &paths.record())?, revision_of(&bytes)))
}

fn record_revision(paths: &RoutinePaths) -> ApiResult<String> {
    Ok(revision_of(&read_bytes(&paths.record())?))
}

fn load_refs(path: &Path) -> ApiResult<(ReferenceSet, String)> {
    match std::fs::read(path) {
        Ok(bytes) => Ok((parse(&bytes, path)?, revision_of(&bytes))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Ok((ReferenceSet::new(), revision_of(b"")))
        }
        Err(e) => Err(ApiError::Internal(e.into())),
    }
}

fn save_refs(path: &Path, set: &ReferenceSet) -> ApiResult<String> {
    write_json(path, set)?;
    Ok(revision_of(&read_bytes(path)?))
}

/// Segment ids are `<routine>:<position>`.
fn parse_segment_id(sid: &str) -> ApiResult<(String, usize)> {
    let bad = || ApiError::NotFound(format!("no segment `{sid}`"));
    let (rid, k) = sid.rsplit_once(':').ok_or_else(bad)?;
    let k = k.parse().map_err(|_| bad())?;
    Ok((rid.to_string(), k))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoutineSummary {
    pub id: String,
    pub frame_count: usize,
    pub fps: f64,
    pub segments: usize,
    pub labelled: usize,
    pub revision: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentView {
    pub id: String,
    pub index: usize,
    #[serde(flatten)]
    pub segment: BounceSegment,
    pub label: Option<SkillCode>,
    pub has_features: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentsView {
    pub routine_id: String,
    pub revision: String,
    pub trampoline_row: usize,
    pub segments: Vec<SegmentView>,
    /// Per-frame contact flags.
    pub contact: Vec<bool>,
}

fn load_segments(paths: &RoutinePaths) -> ApiResult<Vec<BounceSegment>> {
    match std::fs::read(paths.segments()) {
        Ok(bytes) => Ok(parse::<SegmentsDocument>(&bytes, &paths.segments())?.segments),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(ApiError::Internal(e.into())),
    }
}

fn segments_view(
    paths: &RoutinePaths,
    record: &RoutineRecord,
    revision: String,
) -> ApiResult<SegmentsView> {
    let track: TrackFile = read_json(&paths.track())?;
    let segments = load_segments(paths)?;
    Ok(SegmentsView {
        routine_id: record.id.clone(),
        revision,
        trampoline_row: track.trampoline_line.top_row,
        segments: segments
            .into_iter()
            .enumerate()
            .map(|(k, segment)| SegmentView {
                id: format!("{}:{k}", record.id),
                index: k,
                segment,
                label: record.labels.get(&k).copied(),
                has_features: paths.features(k).is_file(),
            })
            .collect(),
        contact: track.contact_flags(),
    })
}

async fn list(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<RoutineSummary>>> {
    let mut out = Vec::new();
    for id in list_routines(&st.data)? {
        let paths = RoutinePaths::in_data_dir(&st.data, &id);
        let (record, revision) = load_record(&paths)?;
        out.push(RoutineSummary {
            segments: load_segments(&paths)?.len(),
            labelled: record.labels.len(),
            id,
            frame_count: record.frame_count,
            fps: record.fps,
            revision,
        });
    }
    Ok(Json(out))
}

async fn routine(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let paths = st.routine(&id)?;
    let (record, revision) = load_record(&paths)?;
    Ok(tagged(&record, &revision))
}

async fn segments(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let paths = st.routine(&id)?;
    let (record, revision) = load_record(&paths)?;
    let view = segments_view(&paths, &record, revision.clone())?;
    Ok(tagged(&view, &revision))
}

async fn frame(
    State(st): State<Arc<AppState>>,
    UrlPath((id, n)): UrlPath<(String, usize)>,
) -> ApiResult<Response> {
    let paths = st.routine(&id)?;
    let png = read_bytes(&paths.crop(n))
        .map_err(|_| ApiError::NotFound(format!("no crop for frame {n}")))?;
    Ok(Response::builder()
        .header(CONTENT_TYPE, "image/png")
        .body(Body::from(png))
        .expect("static headers are valid"))
}

async fn frame_overlay(
    State(st): State<Arc<AppState>>,
    UrlPath((id, n)): UrlPath<(String, usize)>,
) -> ApiResult<Json<Value>> {
    let paths = st.routine(&id)?;
    let bytes = read_bytes(&paths.overlay(n))
        .map_err(|_| ApiError::NotFound(format!("no crop for frame {n}")))?;
    Ok(Json(parse(&bytes, &paths.overlay(n))?))
}

#[derive(Debug, Deserialize)]
pub struct LineUpdate {
    pub top_row: usize,
}

async fn put_line(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Json(body): Json<LineUpdate>,
) -> ApiResult<Response> {
    let paths = st.routine(&id)?;
    let lock = st.routine_lock(&id);
    let _guard = lock.lock().await;
    let (mut record, revision) = load_record(&paths)?;
    check_if_match(&headers, &revision)?;
    let mut track: TrackFile = read_json(&paths.track())?;
    track
        .set_line(body.top_row, st.config.extraction.contact_margin)
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let mut segments = if paths.segments().is_file() {
        load_segments(&paths)?
    } else {
        segment_track_file(&track, &st.config.segmentation).unwrap_or_default()
    };
    attach_airborne(&mut segments, &track.contact_flags());
    write_json(&paths.track(), &track)?;
    write_json(
        &paths.segments(),
        &SegmentsDocument {
            routine_id: id.clone(),
            segments,
        },
    )?;
    record.trampoline_line = track.trampoline_line;
    write_json(&paths.record(), &record)?;
    let revision = record_revision(&paths)?;
    let view = segments_view(&paths, &record, revision.clone())?;
    Ok(tagged(&view, &revision))
}

#[derive(Debug, Deserialize)]
pub struct LabelRequest {
    pub code: String,
    #[serde(default)]
    pub add_to_reference_set: bool,
    #[serde(default)]
    pub athlete_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelResponse {
    pub segment: String,
    pub code: SkillCode,
    pub reference_id: Option<String>,
    pub revision: String,
}

fn segment_paths(st: &AppState, sid: &str) -> ApiResult<(RoutinePaths, String, usize)> {
    let (rid, k) = parse_segment_id(sid)?;
    let paths = st.routine(&rid)?;
    if k >= load_segments(&paths)?.len() {
        return Err(ApiError::NotFound(format!("no segment `{sid}`")));
    }
    Ok((paths, rid, k))
}

fn load_features(paths: &RoutinePaths, sid: &str, k: usize) -> ApiResult<FeatureTrajectory> {
    let bytes = read_bytes(&paths.features(k))
        .map_err(|_| ApiError::NotFound(format!("segment `{sid}` has no features")))?;
    parse(&bytes, &paths.features(k))
}

async fn label(
    State(st): State<Arc<AppState>>,
    UrlPath(sid): UrlPath<String>,
    headers: HeaderMap,
    Json(body): Json<LabelRequest>,
) -> ApiResult<Response> {
    let code = parse_code(&body.code).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let (paths, rid, k) = segment_paths(&st, &sid)?;
    let lock = st.routine_lock(&rid);
    let _guard = lock.lock().await;
    let (mut record, revision) = load_record(&paths)?;
    check_if_match(&headers, &revision)?;
    let trajectory = if body.add_to_reference_set {
        Some(load_features(&paths, &sid, k)?)
    } else {
        None
    };
    let mut reference_id = None;
    if let Some(trajectory) = trajectory {
        let _refs = st.refs_lock.lock().await;
        let (mut set, _) = load_refs(&st.refs_path())?;
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        let provenance = Provenance {
            routine_id: Some(rid.clone()),
            athlete_id: body.athlete_id.clone(),
            created_at,
        };
        reference_id = Some(set.push(code, trajectory, provenance).id.clone());
        save_refs(&st.refs_path(), &set)?;
    }
    record.labels.insert(k, code);
    write_json(&paths.record(), &record)?;
    let revision = record_revision(&paths)?;
    let resp = LabelResponse {
        segment: sid,
        code,
        reference_id,
        revision: revision.clone(),
    };
    Ok(tagged(&resp, &revision))
}

async fn classify_segment(
    State(st): State<Arc<AppState>>,
    UrlPath(sid): UrlPath<String>,
) -> ApiResult<Response> {
    let (paths, _, k) = segment_paths(&st, &sid)?;
    let observed = load_features(&paths, &sid, k)?;
    let (set, _) = load_refs(&st.refs_path())?;
    if set.is_empty() {
        return Err(ApiError::Unprocessable("reference set is empty".into()));
    }
    let result = tokio::task::spawn_blocking(move || classify(&observed, &set))
        .await
        .map_err(|e| ApiError::Internal(e.into()))??;
    Ok(Json(result).into_response())
}

async fn reference_set(State(st): State<Arc<AppState>>) -> ApiResult<Response> {
    let (set, revision) = load_refs(&st.refs_path())?;
    Ok(tagged(&set, &revision))
}

async fn delete_reference(
    State(st): State<Arc<AppState>>,
    UrlPath(entry): UrlPath<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let _refs = st.refs_lock.lock().await;
    let (mut set, revision) = load_refs(&st.refs_path())?;
    check_if_match(&headers, &revision)?;
    if set.remove(&entry).is_none() {
        return Err(ApiError::NotFound(format!("no reference entry `{entry}`")));
    }
    let revision = save_refs(&st.refs_path(), &set)?;
    Ok(tagged(
        &json!({ "removed": entry, "revision": revision }),
        &revision,
    ))
}

async fn catalog() -> Json<Value> {
    Json(serde_json::to_value(load_catalog()).expect("catalog serialises"))
}

async fn latest_evaluation(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let path = st.data.join(LATEST_EVALUATION);
    let bytes =
        read_bytes(&path).map_err(|_| ApiError::NotFound("no evaluation has been run".into()))?;
    Ok(Json(parse(&bytes, &path)?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/routines", get(list))
        .route("/api/routines/{id}", get(routine))
        .route("/api/routines/{id}/segments", get(segments))
        .route("/api/routines/{id}/frames/{n}", get(frame))
        .route("/api/routines/{id}/frames/{n}/overlay", get(frame_overlay))
        .route("/api/routines/{id}/trampoline-line", put(put_line))
        .route("/api/segments/{id}/label", post(label))
        .route("/api/segments/{id}/classify", post(classify_segment))
        .route("/api/reference-set", get(reference_set))
        .route("/api/reference-set/{entry}", delete(delete_reference))
        .route("/api/catalog", get(catalog))
        .route("/api/evaluation/latest", get(latest_evaluation))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
