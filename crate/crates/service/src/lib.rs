//! HTTP facade for live annotation.
//!
//! A human replaces the simulated user: each click is appended to the
//! session, the mask is re-predicted, and the configured adaptation runs
//! exactly as in the benchmark. All bodies are JSON. Masks travel as base64
//! of the binary run-length encoding; images are uploaded as base64 PNG (or
//! PNM) bytes.
//!
//! Undo removes clicks but never reverses optimization steps already taken.
//!
//! Requests on one session are serialized in arrival order, and so are
//! mutations of one decoder. Under reset mode the pre-image snapshot lives
//! in the decoder, so two reset-mode sessions interleaved on the same
//! decoder share one snapshot slot; give concurrent annotators their own
//! cloned decoders.

mod error;
mod session;

pub use error::{ApiError, ApiResult};
pub use session::{LiveSession, Status};

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex as AsyncMutex;

use clickadapt::adapt::{self, AdaptationConfig, ClickAdaptation, ImageDoneSummary, ResultMaskMode};
use clickadapt::data::image_from_bytes;
use clickadapt::mask::{encode_rle, BinaryMask, Click, ClickLabel};
use clickadapt::neuro::{Checkpoint, DecoderRegistry, DecoderState, Surrogate};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub checkpoint: Checkpoint,
    /// Source of the checkpoint; decoder reset re-reads it when present.
    pub checkpoint_path: Option<PathBuf>,
    /// Defaults for sessions that do not override them.
    pub adaptation: AdaptationConfig,
    /// Uploaded images are resampled to this size; `None` keeps theirs.
    pub resolution: Option<(usize, usize)>,
    pub idle_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(checkpoint: Checkpoint) -> Self {
        Self {
            checkpoint,
            checkpoint_path: None,
            adaptation: AdaptationConfig::baseline(),
            resolution: Some((128, 128)),
            idle_timeout: Duration::from_secs(900),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Metrics {
    pub sessions_created: u64,
    pub sessions_finished: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub expired: u64,
    /// Clicks summed over finished sessions.
    pub clicks: u64,
    pub mean_clicks: f64,
    pub click_steps: u64,
    pub post_image_steps: u64,
}

type Shared<T> = Arc<AsyncMutex<T>>;

struct Inner {
    surrogate: Surrogate,
    base: Checkpoint,
    checkpoint_path: Option<PathBuf>,
    defaults: AdaptationConfig,
    resolution: Option<(usize, usize)>,
    idle_timeout: Duration,
    decoders: Mutex<BTreeMap<String, Shared<DecoderState>>>,
    sessions: Mutex<HashMap<String, Shared<LiveSession>>>,
    next_id: AtomicU64,
    metrics: Mutex<Metrics>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let mut decoders = BTreeMap::new();
        decoders.insert(
            DecoderRegistry::DEFAULT.to_string(),
            Arc::new(AsyncMutex::new(config.checkpoint.decoder.clone())),
        );
        Self {
            inner: Arc::new(Inner {
                surrogate: config.checkpoint.surrogate,
                base: config.checkpoint,
                checkpoint_path: config.checkpoint_path,
                defaults: config.adaptation,
                resolution: config.resolution,
                idle_timeout: config.idle_timeout,
                decoders: Mutex::new(decoders),
                sessions: Mutex::new(HashMap::new()),
                next_id: AtomicU64::new(1),
                metrics: Mutex::new(Metrics::default()),
            }),
        }
    }

    fn session(&self, id: &str) -> ApiResult<Shared<LiveSession>> {
        self.inner
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    fn decoder(&self, name: &str) -> ApiResult<Shared<DecoderState>> {
        self.inner
            .decoders
            .lock()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::unknown_decoder(name))
    }

    fn record_finish(&self, session: &LiveSession, summary: &ImageDoneSummary, how: Finish) {
        let mut m = self.inner.metrics.lock().unwrap();
        m.sessions_finished += 1;
        match how {
            Finish::Accepted => m.accepted += 1,
            Finish::Rejected => m.rejected += 1,
            Finish::Expired => m.expired += 1,
        }
        m.clicks += session.clicks().len() as u64;
        m.mean_clicks = m.clicks as f64 / m.sessions_finished as f64;
        m.click_steps += session.click_steps as u64;
        m.post_image_steps += summary.steps as u64;
    }

    /// Runs the reject path on every active session idle for longer than
    /// the timeout and drops it. Busy sessions are skipped.
    pub async fn expire_idle(&self) -> usize {
        let all: Vec<(String, Shared<LiveSession>)> = self
            .inner
            .sessions
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut expired = 0;
        for (id, session) in all {
            let Ok(mut s) = session.try_lock_owned() else {
                continue;
            };
            if s.last_active.elapsed() < self.inner.idle_timeout {
                continue;
            }
            if s.status == Status::Active {
                let Ok(decoder) = self.decoder(&s.decoder) else {
                    continue;
                };
                let mut d = decoder.lock().await;
                if let Ok(summary) = s.finish(&self.inner.surrogate, &mut d, false) {
                    self.record_finish(&s, &summary, Finish::Expired);
                }
            }
            self.inner.sessions.lock().unwrap().remove(&id);
            expired += 1;
        }
        expired
    }
}

#[derive(Clone, Copy)]
enum Finish {
    Accepted,
    Rejected,
    Expired,
}

// ---- wire types ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

/// Per-session overrides of the server's adaptation defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConfigPatch {
    pub ca: Option<ClickAdaptation>,
    pub rm: Option<ResultMaskMode>,
    pub cm: Option<Toggle>,
    pub k: Option<usize>,
    pub lr: Option<f64>,
}

impl ConfigPatch {
    fn apply(&self, base: &AdaptationConfig) -> clickadapt::Result<AdaptationConfig> {
        let mut c = base.clone();
        if let Some(ca) = self.ca {
            c.click_adaptation = ca;
        }
        if let Some(rm) = self.rm {
            c.result_mask = rm;
        }
        if let Some(cm) = self.cm {
            c.click_mask = cm == Toggle::On;
        }
        if let Some(k) = self.k {
            c.erosion_iters = k;
        }
        if let Some(lr) = self.lr {
            c.learning_rate = lr;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateSession {
    /// Base64 of PNG or PNM bytes.
    pub image: String,
    #[serde(default)]
    pub decoder: Option<String>,
    #[serde(default)]
    pub config: ConfigPatch,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MaskPayload {
    /// Base64 of the binary run-length encoding.
    pub rle: String,
    pub height: usize,
    pub width: usize,
    /// Foreground pixel count, for client-side cross-checks.
    pub foreground: usize,
}

impl MaskPayload {
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            rle: B64.encode(encode_rle(mask)),
            height: mask.height(),
            width: mask.width(),
            foreground: mask.area(),
        }
    }

    pub fn decode(&self) -> clickadapt::Result<BinaryMask> {
        let bytes = B64
            .decode(&self.rle)
            .map_err(|e| clickadapt::Error::MalformedEncoding(e.to_string()))?;
        clickadapt::mask::decode_rle(&bytes)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub decoder: String,
    pub config: AdaptationConfig,
    pub mask: MaskPayload,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClickRequest {
    pub row: usize,
    pub col: usize,
    pub label: ClickLabel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskUpdate {
    pub mask: MaskPayload,
    pub clicks: usize,
    /// Loss of the per-click adaptation step, if one ran.
    pub loss: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: Status,
    pub decoder: String,
    pub config: AdaptationConfig,
    pub clicks: Vec<Click>,
    pub mask: MaskPayload,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FinishRequest {
    #[serde(default = "yes")]
    pub accept: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinishSummary {
    pub accepted: bool,
    pub clicks: usize,
    pub click_steps: usize,
    /// Post-image optimization steps (0 or 1).
    pub steps: usize,
    pub restored: bool,
    pub loss: Option<f64>,
    pub positive_labels: usize,
    pub negative_labels: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecoderInfo {
    pub name: String,
    pub step_count: u64,
    pub parameters: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CloneRequest {
    pub to: String,
}

// ---- handlers ----

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<SessionCreated>> {
    let req: CreateSession = parse_body(&body)?;
    let bytes = B64
        .decode(req.image.trim())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "DecodeError", format!("image is not base64: {e}")))?;
    let name = req.decoder.unwrap_or_else(|| DecoderRegistry::DEFAULT.to_string());
    let decoder = state.decoder(&name)?;
    let config = req.config.apply(&state.inner.defaults)?;
    let surrogate = state.inner.surrogate;
    let resolution = state.inner.resolution;
    let feats = blocking(move || Ok(surrogate.embed(&image_from_bytes(&bytes, resolution)?))).await?;

    let id = format!("s{}", state.inner.next_id.fetch_add(1, Ordering::Relaxed));
    let session = LiveSession::new(id.clone(), name.clone(), config.clone(), feats);
    let mask = MaskPayload::from_mask(&session.current().threshold());
    {
        let mut d = decoder.lock().await;
        adapt::on_image_start(&config, &mut d);
    }
    state
        .inner
        .sessions
        .lock()
        .unwrap()
        .insert(id.clone(), Arc::new(AsyncMutex::new(session)));
    state.inner.metrics.lock().unwrap().sessions_created += 1;
    Ok(Json(SessionCreated {
        session_id: id,
        decoder: name,
        config,
        mask,
    }))
}

async fn post_click(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MaskUpdate>> {
    let req: ClickRequest = parse_body(&body)?;
    let session = state.session(&id)?;
    let mut s = session.lock_owned().await;
    if s.status == Status::Finished {
        return Err(ApiError::session_finished(&id));
    }
    let mut d = state.decoder(&s.decoder)?.lock_owned().await;
    let surrogate = state.inner.surrogate;
    let click = Click {
        row: req.row,
        col: req.col,
        label: req.label,
    };
    blocking(move || {
        let loss = s.add_click(&surrogate, &mut d, click)?;
        Ok(Json(MaskUpdate {
            mask: MaskPayload::from_mask(&s.current().threshold()),
            clicks: s.clicks().len(),
            loss,
        }))
    })
    .await
}

async fn undo_click(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<MaskUpdate>> {
    let session = state.session(&id)?;
    let mut s = session.lock_owned().await;
    if s.status == Status::Finished {
        return Err(ApiError::session_finished(&id));
    }
    let d = state.decoder(&s.decoder)?.lock_owned().await;
    let surrogate = state.inner.surrogate;
    blocking(move || {
        if !s.undo(&surrogate, &d)? {
            return Err(ApiError::nothing_to_undo(&s.id));
        }
        Ok(Json(MaskUpdate {
            mask: MaskPayload::from_mask(&s.current().threshold()),
            clicks: s.clicks().len(),
            loss: None,
        }))
    })
    .await
}

async fn finish_session(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<FinishSummary>> {
    let req: FinishRequest = if body.iter().all(u8::is_ascii_whitespace) {
        FinishRequest { accept: true }
    } else {
        parse_body(&body)?
    };
    let session = state.session(&id)?;
    let mut s = session.lock_owned().await;
    if s.status == Status::Finished {
        return Err(ApiError::session_finished(&id));
    }
    let mut d = state.decoder(&s.decoder)?.lock_owned().await;
    let surrogate = state.inner.surrogate;
    let st = state.clone();
    blocking(move || {
        let summary = s.finish(&surrogate, &mut d, req.accept)?;
        let how = if req.accept { Finish::Accepted } else { Finish::Rejected };
        st.record_finish(&s, &summary, how);
        Ok(Json(FinishSummary {
            accepted: req.accept,
            clicks: s.clicks().len(),
            click_steps: s.click_steps,
            steps: summary.steps,
            restored: summary.restored,
            loss: summary.loss,
            positive_labels: summary.positive_labels,
            negative_labels: summary.negative_labels,
        }))
    })
    .await
}

async fn get_mask(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    Ok(Json(SessionView {
        session_id: s.id.clone(),
        status: s.status,
        decoder: s.decoder.clone(),
        config: s.config.clone(),
        clicks: s.clicks().to_vec(),
        mask: MaskPayload::from_mask(&s.current().threshold()),
    }))
}

async fn list_decoders(State(state): State<AppState>) -> Json<Vec<DecoderInfo>> {
    let all: Vec<(String, Shared<DecoderState>)> = state
        .inner
        .decoders
        .lock()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let mut out = Vec::with_capacity(all.len());
    for (name, d) in all {
        let d = d.lock().await;
        out.push(DecoderInfo {
            name,
            step_count: d.step_count(),
            parameters: d.parameter_count(),
        });
    }
    Json(out)
}

async fn clone_decoder(State(state): State<AppState>, Path(name): Path<String>, body: Bytes) -> ApiResult<Json<DecoderInfo>> {
    let req: CloneRequest = parse_body(&body)?;
    if req.to.is_empty() || req.to.contains('/') {
        return Err(ApiError::bad_request("decoder names must be nonempty and contain no `/`"));
    }
    let copy = state.decoder(&name)?.lock().await.clone();
    let info = DecoderInfo {
        name: req.to.clone(),
        step_count: copy.step_count(),
        parameters: copy.parameter_count(),
    };
    let mut decoders = state.inner.decoders.lock().unwrap();
    if decoders.contains_key(&req.to) {
        return Err(clickadapt::Error::NameCollision(req.to).into());
    }
    decoders.insert(req.to, Arc::new(AsyncMutex::new(copy)));
    Ok(Json(info))
}

async fn reset_decoder(State(state): State<AppState>, Path(name): Path<String>) -> ApiResult<Json<DecoderInfo>> {
    let decoder = state.decoder(&name)?;
    let fresh = match state.inner.checkpoint_path.clone() {
        Some(path) => {
            let ck = blocking(move || Ok(Checkpoint::load(path)?)).await?;
            if ck.surrogate != state.inner.surrogate {
                return Err(ApiError::internal("checkpoint on disk no longer matches the running encoder"));
            }
            ck.decoder
        }
        None => state.inner.base.decoder.clone(),
    };
    let mut d = decoder.lock().await;
    *d = fresh;
    Ok(Json(DecoderInfo {
        name,
        step_count: d.step_count(),
        parameters: d.parameter_count(),
    }))
}

async fn get_metrics(State(state): State<AppState>) -> Json<Metrics> {
    Json(state.inner.metrics.lock().unwrap().clone())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/clicks", post(post_click))
        .route("/sessions/{id}/undo", post(undo_click))
        .route("/sessions/{id}/finish", post(finish_session))
        .route("/sessions/{id}/mask", get(get_mask))
        .route("/decoders", get(list_decoders))
        .route("/decoders/{name}/clone", post(clone_decoder))
        .route("/decoders/{name}/reset", post(reset_decoder))
        .route("/metrics", get(get_metrics))
        .with_state(state)
}

/// Serves on `listener` until the process ends, expiring idle sessions in
/// the background.
pub async fn serve(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    let period = (state.inner.idle_timeout / 4).clamp(Duration::from_millis(10), Duration::from_secs(30));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.expire_idle().await;
        }
    });
    axum::serve(listener, router(state)).await
}

/// Parses `HxW`, e.g. `128x128`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    match (h.trim().parse::<usize>(), w.trim().parse::<usize>()) {
        (Ok(h), Ok(w)) if h > 0 && w > 0 => Ok((h, w)),
        _ => Err(format!("expected two positive integers in `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_flag() {
        assert_eq!(parse_resolution("128x96"), Ok((128, 96)));
        assert!(parse_resolution("128").is_err());
        assert!(parse_resolution("0x4").is_err());
    }

    #[test]
    fn config_patch_overrides() {
        let patch: ConfigPatch = serde_json::from_str(r#"{"ca":"reset","rm":"eroded","cm":"on"}"#).unwrap();
        let c = patch.apply(&AdaptationConfig::baseline()).unwrap();
        assert_eq!(c.label(), "full-method");
        let bad: ConfigPatch = serde_json::from_str(r#"{"lr":-1}"#).unwrap();
        assert!(bad.apply(&AdaptationConfig::baseline()).is_err());
    }

    #[test]
    fn mask_payload_roundtrip() {
        let m = BinaryMask::from_fn(7, 5, |r, c| (r + c) % 3 == 0);
        let p = MaskPayload::from_mask(&m);
        assert_eq!(p.foreground, m.area());
        assert_eq!(p.decode().unwrap(), m);
    }
}
