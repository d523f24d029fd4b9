//! HTTP/JSON service for the operator.
//!
//! | Route | Response |
//! |---|---|
//! | `GET /api/run` | run id, status, resolved config, evaluation count, budget, best-so-far series, fittest pairing |
//! | `GET /api/pending` | `{"pending": <request>}` or `{"pending": null}` |
//! | `GET /api/pending/A.stl`, `B.stl` | binary STL (`model/stl`) of the genome in that rig position |
//! | `POST /api/measurement` | body `{"request_id": n, "rpm": x}` |
//! | `GET /api/history` | `{"evaluations": [...]}`, one row per measurement |
//!
//! Measurement errors are JSON `{"error": <code>, "message": <text>}`:
//! 422 for a malformed body or an rpm that is negative or not a number,
//! 404 for a request id that is not pending, 409 for a request that already
//! has a measurement.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::monitor::RunMonitor;
use crate::fitness::{Hub, Species, SubmitError};

#[derive(Clone)]
pub struct ServiceState {
    pub hub: Arc<Hub>,
    pub monitor: Arc<Mutex<RunMonitor>>,
}

impl ServiceState {
    fn monitor(&self) -> std::sync::MutexGuard<'_, RunMonitor> {
        self.monitor.lock().unwrap_or_else(|e| e.into_inner())
    }
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (
        status,
        Json(json!({"error": code, "message": message.into()})),
    )
        .into_response()
}

async fn run(State(s): State<ServiceState>) -> Response {
    Json(s.monitor().snapshot()).into_response()
}

async fn pending(State(s): State<ServiceState>) -> Response {
    Json(json!({ "pending": s.hub.pending() })).into_response()
}

async fn pending_stl(State(s): State<ServiceState>, Path(file): Path<String>) -> Response {
    let Some(species) = file
        .strip_suffix(".stl")
        .and_then(|n| n.parse::<Species>().ok())
    else {
        return error(
            StatusCode::NOT_FOUND,
            "unknown-file",
            format!("no file {file:?}; use A.stl or B.stl"),
        );
    };
    let Some(p) = s.hub.pending() else {
        return error(
            StatusCode::NOT_FOUND,
            "no-pending-request",
            "nothing is waiting to be fabricated",
        );
    };
    match tokio::fs::read(p.stl_path(species)).await {
        Ok(bytes) => (
            [
                (header::CONTENT_TYPE, "model/stl".to_string()),
                (
                    header::CONTENT_DISPOSITION,
                    format!("attachment; filename=\"{}-{}.stl\"", p.request_id, species),
                ),
            ],
            bytes,
        )
            .into_response(),
        Err(e) => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "stl-unreadable",
            e.to_string(),
        ),
    }
}

async fn measurement(State(s): State<ServiceState>, body: Bytes) -> Response {
    let unprocessable =
        |code: &str, msg: String| error(StatusCode::UNPROCESSABLE_ENTITY, code, msg);
    let value: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return unprocessable("malformed-body", e.to_string()),
    };
    let Some(request_id) = value.get("request_id").and_then(|v| v.as_u64()) else {
        return unprocessable(
            "invalid-request-id",
            "request_id must be a non-negative integer".into(),
        );
    };
    let Some(rpm) = value.get("rpm").and_then(|v| v.as_f64()) else {
        return unprocessable("rpm-not-numeric", "rpm must be a number".into());
    };
    match s.hub.submit(request_id, rpm) {
        Ok(()) => Json(json!({"accepted": request_id, "rpm": rpm})).into_response(),
        Err(e @ SubmitError::InvalidRpm(_)) => unprocessable("rpm-invalid", e.to_string()),
        Err(e @ SubmitError::UnknownRequest(_)) => {
            error(StatusCode::NOT_FOUND, "unknown-request", e.to_string())
        }
        Err(e @ SubmitError::Duplicate(_)) => {
            error(StatusCode::CONFLICT, "duplicate-measurement", e.to_string())
        }
    }
}

async fn history(State(s): State<ServiceState>) -> Response {
    Json(json!({ "evaluations": s.monitor().history() })).into_response()
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/api/run", get(run))
        .route("/api/pending", get(pending))
        .route("/api/pending/{file}", get(pending_stl))
        .route("/api/measurement", post(measurement))
        .route("/api/history", get(history))
        .with_state(state)
}

/// A service running on its own thread.
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    /// The bound address; port 0 in the request resolves here.
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `bind` and serves until the handle is shut down or dropped.
pub fn serve(state: ServiceState, bind: &str) -> std::io::Result<ServiceHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(bind))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(state);
    let thread = std::thread::Builder::new()
        .name("vawt-mine-http".into())
        .spawn(move || {
            runtime.block_on(async move {
                let shutdown = async {
                    let _ = rx.await;
                };
                if let Err(e) = axum::serve(listener, app)
                    .with_graceful_shutdown(shutdown)
                    .await
                {
                    log::error!("http service stopped: {e}");
                }
            });
        })?;
    Ok(ServiceHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
