//! HTTP+JSON review server over a dataset directory.
//!
//! Every accepted edit rewrites `annotations.jsonl` atomically and then
//! appends a line to `review_journal.jsonl`. A record's revision is the
//! number of journal entries for it, so revisions survive restarts.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, put};
use axum::{Json, Router};
use orientseg_core::dataset_io::{load_annotations, to_jsonl, validate_record, write_atomic, BoxRecord, RecordKind};
use orientseg_core::AnnotatedSlap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::dataset_dir::{annotations_path, ANNOTATIONS_FILE};

pub const JOURNAL_FILE: &str = "review_journal.jsonl";

#[derive(Debug)]
pub struct ReviewState {
    dir: PathBuf,
    records: Vec<AnnotatedSlap>,
    index: HashMap<String, usize>,
    revisions: HashMap<String, u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JournalEntry {
    slap_id: String,
    revision: u64,
    boxes: Vec<BoxRecord>,
}

impl ReviewState {
    /// Loads `dir`. A missing annotation file is an empty dataset.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = annotations_path(dir);
        let records = if path.exists() { load_annotations(&path)? } else { Vec::new() };
        let index = records.iter().enumerate().map(|(i, r)| (r.slap_id.clone(), i)).collect();
        let mut revisions = HashMap::new();
        let journal = dir.join(JOURNAL_FILE);
        if journal.exists() {
            let text = std::fs::read_to_string(&journal).with_context(|| format!("reading {}", journal.display()))?;
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let e: JournalEntry =
                    serde_json::from_str(line).with_context(|| format!("{JOURNAL_FILE} line {}", n + 1))?;
                *revisions.entry(e.slap_id).or_insert(0) += 1;
            }
        }
        Ok(Self { dir: dir.to_path_buf(), records, index, revisions })
    }

    pub fn revision(&self, slap_id: &str) -> u64 {
        self.revisions.get(slap_id).copied().unwrap_or(0)
    }

    fn record_json(&self, i: usize) -> Value {
        let r = &self.records[i];
        let mut v = serde_json::to_value(r).expect("records serialize");
        if let Value::Object(m) = &mut v {
            m.insert("revision".into(), json!(self.revision(&r.slap_id)));
        }
        v
    }

    fn commit(&mut self, i: usize, boxes: Vec<BoxRecord>) -> Result<u64> {
        let previous = std::mem::replace(&mut self.records[i].boxes, boxes);
        let text = to_jsonl(&self.records)?;
        if let Err(e) = write_atomic(&annotations_path(&self.dir), text.as_bytes()) {
            self.records[i].boxes = previous;
            return Err(e.into());
        }
        let slap_id = self.records[i].slap_id.clone();
        let revision = self.revision(&slap_id) + 1;
        let entry = JournalEntry { slap_id: slap_id.clone(), revision, boxes: self.records[i].boxes.clone() };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let path = self.dir.join(JOURNAL_FILE);
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        f.write_all(line.as_bytes())?;
        f.sync_all()?;
        self.revisions.insert(slap_id, revision);
        Ok(revision)
    }
}

pub type SharedState = Arc<RwLock<ReviewState>>;

#[derive(Debug, Deserialize)]
pub struct BoxesUpdate {
    pub revision: u64,
    pub boxes: Vec<BoxRecord>,
}

fn error(status: StatusCode, body: Value) -> Response {
    (status, Json(body)).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, json!({ "error": "not_found", "slap_id": id }))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn list(State(st): State<SharedState>) -> Json<Value> {
    let st = st.read().await;
    let rows: Vec<Value> = st
        .records
        .iter()
        .map(|r| {
            json!({
                "slap_id": r.slap_id,
                "hand": r.hand,
                "age_group": r.age_group,
                "revision": st.revision(&r.slap_id),
            })
        })
        .collect();
    Json(Value::Array(rows))
}

async fn get_slap(State(st): State<SharedState>, UrlPath(id): UrlPath<String>) -> Response {
    let st = st.read().await;
    match st.index.get(&id) {
        Some(&i) => Json(st.record_json(i)).into_response(),
        None => not_found(&id),
    }
}

async fn get_image(State(st): State<SharedState>, UrlPath(id): UrlPath<String>) -> Response {
    let path = {
        let st = st.read().await;
        match st.index.get(&id) {
            Some(&i) => st.dir.join(&st.records[i].image_path),
            None => return not_found(&id),
        }
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, json!({ "error": "image_missing", "slap_id": id })),
    }
}

async fn put_boxes(
    State(st): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    Json(update): Json<BoxesUpdate>,
) -> Response {
    let mut st = st.write().await;
    let Some(&i) = st.index.get(&id) else {
        return not_found(&id);
    };
    let current = st.revision(&id);
    if update.revision != current {
        return error(
            StatusCode::CONFLICT,
            json!({
                "error": "conflict",
                "slap_id": id,
                "revision": current,
                "submitted_revision": update.revision,
                "record": st.record_json(i),
            }),
        );
    }

    let mut boxes = update.boxes;
    let mut problems: Vec<String> = Vec::new();
    for (k, b) in boxes.iter_mut().enumerate() {
        match b.bbox.validate() {
            Ok(()) => b.bbox = b.bbox.canonical(),
            Err(e) => problems.push(format!("box {k}: {e}")),
        }
    }
    if problems.is_empty() {
        let candidate = AnnotatedSlap { boxes: boxes.clone(), ..st.records[i].clone() };
        problems.extend(validate_record(&candidate, RecordKind::Annotation).iter().map(|v| v.to_string()));
    }
    if !problems.is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": "invalid", "violations": problems }));
    }

    match st.commit(i, boxes) {
        Ok(revision) => Json(json!({ "revision": revision })).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "write_failed", "detail": e.to_string() })),
    }
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/slaps", get(list))
        .route("/api/slaps/{id}", get(get_slap))
        .route("/api/slaps/{id}/image", get(get_image))
        .route("/api/slaps/{id}/boxes", put(put_boxes))
        .with_state(state)
}

pub fn app(dir: &Path) -> Result<Router> {
    let state = ReviewState::load(dir)?;
    Ok(router(Arc::new(RwLock::new(state))))
}

pub async fn serve(dir: &Path, addr: SocketAddr) -> Result<()> {
    let app = app(dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    eprintln!("serving {} ({ANNOTATIONS_FILE}) on http://{addr}", dir.display());
    axum::serve(listener, app).await?;
    Ok(())
}

pub fn serve_blocking(dir: &Path, host: &str, port: u16) -> Result<()> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| crate::UsageError(format!("bad listen address {host}:{port}: {e}")))?;
    tokio::runtime::Runtime::new()?.block_on(serve(dir, addr))
}
