//! HTTP front end for [`MockLm`].
//!
//! Routes: `POST /generate` (generation and echo scoring), `POST /embed`,
//! `GET /requests` (the request log) and `POST /script` (replace the script
//! with the JSON body).

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::mock::{MockLm, MockScript, RequestLogEntry};
use super::wire::{EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse};

#[derive(Clone)]
struct AppState {
    lm: Arc<MockLm>,
    delay_override_ms: Option<u64>,
}

impl AppState {
    async fn pause(&self) {
        let ms = self.delay_override_ms.unwrap_or_else(|| self.lm.delay_ms());
        if ms > 0 {
            tokio::time::sleep(Duration::from_millis(ms)).await;
        }
    }
}

async fn generate(
    State(state): State<AppState>,
    Json(req): Json<GenerateRequest>,
) -> Json<GenerateResponse> {
    let response = state.lm.handle_generate(&req);
    state.pause().await;
    Json(response)
}

async fn embed(State(state): State<AppState>, Json(req): Json<EmbedRequest>) -> Json<EmbedResponse> {
    let response = state.lm.embed(&req);
    state.pause().await;
    Json(response)
}

async fn requests(State(state): State<AppState>) -> Json<Vec<RequestLogEntry>> {
    Json(state.lm.request_log())
}

async fn load_script(
    State(state): State<AppState>,
    body: String,
) -> Result<Json<serde_json::Value>, (StatusCode, String)> {
    let script = MockScript::from_json_str(&body).map_err(|e| (StatusCode::BAD_REQUEST, e))?;
    state.lm.replace_script(script);
    Ok(Json(serde_json::json!({ "ok": true })))
}

pub fn router(lm: Arc<MockLm>, delay_override_ms: Option<u64>) -> Router {
    Router::new()
        .route("/generate", post(generate))
        .route("/embed", post(embed))
        .route("/requests", get(requests))
        .route("/script", post(load_script))
        .with_state(AppState {
            lm,
            delay_override_ms,
        })
}

/// A running mock server. Dropping it stops the server.
pub struct MockServer {
    addr: SocketAddr,
    lm: Arc<MockLm>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and serves on the current
    /// tokio runtime. `delay_override_ms` replaces the script's delay.
    pub async fn start(
        script: MockScript,
        port: u16,
        delay_override_ms: Option<u64>,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port)).await?;
        let addr = listener.local_addr()?;
        let lm = Arc::new(MockLm::new(script));
        let app = router(Arc::clone(&lm), delay_override_ms);
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            lm,
            shutdown: Some(tx),
            task: Some(task),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn generate_url(&self) -> String {
        format!("{}/generate", self.base_url())
    }

    pub fn embed_url(&self) -> String {
        format!("{}/embed", self.base_url())
    }

    pub fn lm(&self) -> &Arc<MockLm> {
        &self.lm
    }

    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        self.lm.request_log()
    }

    /// Runs until the server task exits.
    pub async fn wait(mut self) {
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
