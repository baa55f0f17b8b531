//! HTTP session service.
//!
//! Each session owns one episode. Clients send the same `n + 1` action bits
//! agents use, and the transcript is an ordinary [`Trajectory`], so human
//! play and agent play land in the same dataset format.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blicket_core::belief::{Belief, PosteriorEntry};
use blicket_core::config::{preset, presets, EnvSpec, Preset};
use blicket_core::env::{Action, BlicketEnv, EpisodeState, Observation, Phase};
use blicket_core::hypothesis::Hypothesis;
use blicket_core::trajectory::{Trajectory, TrajectoryHeader};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::sampler_prior;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    #[default]
    Human,
    Agent,
}

impl Owner {
    fn as_str(self) -> &'static str {
        match self {
            Owner::Human => "human",
            Owner::Agent => "agent",
        }
    }
}

struct Session {
    env: BlicketEnv,
    state: EpisodeState,
    observation: Observation,
    transcript: Trajectory,
    debug: bool,
    belief: Option<Belief>,
    created_ms: u128,
    updated_ms: u128,
}

impl Session {
    fn debug_fields(&self) -> Option<(Hypothesis, Vec<PosteriorEntry>)> {
        match (&self.belief, self.debug) {
            (Some(b), true) => Some((*self.state.hidden(), b.posterior())),
            _ => None,
        }
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Mutex<Session>>>>>,
    store: Option<Arc<Mutex<PathBuf>>>,
}

impl AppState {
    /// Completed transcripts are appended to `store` as JSON lines.
    pub fn new(store: Option<PathBuf>) -> Self {
        AppState {
            sessions: Arc::default(),
            store: store.map(|p| Arc::new(Mutex::new(p))),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
    }

    /// Writes the whole episode with one `write_all` under the store lock,
    /// so concurrent sessions never interleave lines.
    fn append(&self, transcript: &Trajectory) -> std::io::Result<()> {
        let Some(store) = &self.store else {
            return Ok(());
        };
        let path = store.lock().expect("store lock");
        let mut file = OpenOptions::new().create(true).append(true).open(&*path)?;
        file.write_all(transcript.to_jsonl().as_bytes())?;
        file.flush()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub config: Option<EnvSpec>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub debug: bool,
    #[serde(default)]
    pub owner: Owner,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct DebugView {
    hidden_hypothesis: Hypothesis,
    posterior: Vec<PosteriorEntry>,
}

#[derive(Debug, Serialize)]
struct SessionView {
    session_id: String,
    phase: Phase,
    step: usize,
    observation: Observation,
    cumulative_reward: f64,
    done: bool,
    owner: Owner,
    created_ms: u128,
    updated_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    debug: Option<DebugView>,
}

fn view(id: &str, s: &Session) -> SessionView {
    SessionView {
        session_id: id.to_string(),
        phase: s.state.phase(),
        step: s.state.step(),
        observation: s.observation,
        cumulative_reward: s.state.accumulated_reward(),
        done: s.state.is_done(),
        owner: match s.transcript.header.owner.as_deref() {
            Some("agent") => Owner::Agent,
            _ => Owner::Human,
        },
        created_ms: s.created_ms,
        updated_ms: s.updated_ms,
        debug: s.debug_fields().map(|(hidden_hypothesis, posterior)| DebugView {
            hidden_hypothesis,
            posterior,
        }),
    }
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let Json(req) = body?;
    let spec = match (req.config, req.preset) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either config or preset, not both")),
        (Some(spec), None) => spec,
        (None, Some(name)) => {
            preset(&name)
                .ok_or_else(|| ApiError::bad_request(format!("unknown preset '{name}'")))?
                .env
        }
        (None, None) => EnvSpec::default(),
    };
    let id = uuid::Uuid::new_v4();
    let seed = req.seed.unwrap_or_else(|| {
        let b = id.as_bytes();
        u64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
    });
    let config = spec.build(seed).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let belief = if req.debug {
        Some(sampler_prior(&config).map_err(|e| ApiError::bad_request(e.to_string()))?)
    } else {
        None
    };
    let env = BlicketEnv::new(config).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (state, observation) = env.reset(seed);
    let id = id.simple().to_string();
    let mut header = TrajectoryHeader::new(id.clone(), *state.hidden(), env.config(), seed);
    header.owner = Some(req.owner.as_str().to_string());
    let now = now_ms();
    let session = Session {
        env,
        state,
        observation,
        transcript: Trajectory::new(header),
        debug: req.debug,
        belief,
        created_ms: now,
        updated_ms: now,
    };
    let mut body = json!({ "session_id": id, "observation": observation });
    if let Some((hidden, posterior)) = session.debug_fields() {
        body["debug"] = json!({ "hidden_hypothesis": hidden, "posterior": posterior });
    }
    app.sessions
        .lock()
        .expect("session map lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = app.session(&id)?;
    let s = session.lock().expect("session lock");
    Ok(Json(view(&id, &s)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActRequest {
    pub bits: Vec<bool>,
}

#[derive(Debug, Serialize)]
struct ActResponse {
    observation: Observation,
    reward: f64,
    done: bool,
    cumulative_reward: f64,
    phase: Phase,
    step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    debug: Option<DebugView>,
}

async fn act(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActRequest>, JsonRejection>,
) -> Result<Json<ActResponse>, ApiError> {
    let session = app.session(&id)?;
    let Json(req) = body?;
    let mut s = session.lock().expect("session lock");
    if s.state.is_done() {
        return Err(ApiError::new(StatusCode::CONFLICT, "episode already finished"));
    }
    let n = s.env.n_objects();
    let action = Action::from_bits(&req.bits, n).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let phase = s.state.phase();
    let session_ref = &mut *s;
    let outcome = session_ref
        .env
        .step(&mut session_ref.state, &action)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    s.transcript.record(phase, &action, &outcome);
    s.observation = outcome.observation;
    s.updated_ms = now_ms();
    if phase == Phase::Explore {
        if let Some(b) = &s.belief {
            let updated = b
                .update(outcome.observation.placed, outcome.observation.lit)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            s.belief = Some(updated);
        }
    }
    if outcome.done {
        app.append(&s.transcript)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    }
    Ok(Json(ActResponse {
        observation: outcome.observation,
        reward: outcome.reward,
        done: outcome.done,
        cumulative_reward: s.state.accumulated_reward(),
        phase: s.state.phase(),
        step: s.state.step(),
        debug: s.debug_fields().map(|(hidden_hypothesis, posterior)| DebugView {
            hidden_hypothesis,
            posterior,
        }),
    }))
}

/// Transcript so far. The header's hidden hypothesis is blanked unless the
/// session is in debug mode; the stored copy keeps it.
async fn transcript(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let session = app.session(&id)?;
    let s = session.lock().expect("session lock");
    let mut value = serde_json::to_value(&s.transcript)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    if !s.debug {
        value["header"]["hidden_hypothesis"] = serde_json::Value::Null;
    }
    Ok(Json(value))
}

async fn list_presets() -> Json<Vec<Preset>> {
    Json(presets())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/act", post(act))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/presets", get(list_presets))
        .with_state(state)
}

/// Binds first so a busy port is reported before anything else happens.
pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| HarnessError::Bind { addr, source })
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> Result<()> {
    axum::serve(listener, router(state)).await?;
    Ok(())
}
