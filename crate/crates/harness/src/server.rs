//! WebSocket service for the operator console. One session at a time; a
//! console that drops mid-episode rolls the agent back to the episode start.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use crate::error::Result;
use crate::session::{ServerMessage, Session};

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Shared>>,
    out_dir: Option<Arc<PathBuf>>,
}

struct Shared {
    session: Session,
    connected: bool,
}

impl AppState {
    pub fn new(session: Session, out_dir: Option<PathBuf>) -> AppState {
        AppState { inner: Arc::new(Mutex::new(Shared { session, connected: false })), out_dir: out_dir.map(Arc::new) }
    }

    /// The record so far, aborted episodes included.
    pub async fn record(&self) -> crate::record::RunRecord {
        self.inner.lock().await.session.record()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new().route("/ws", get(ws_handler)).route("/record", get(record_handler)).with_state(state)
}

/// Binds and serves until the task is dropped.
pub async fn serve(addr: SocketAddr, state: AppState) -> Result<()> {
    serve_on(TcpListener::bind(addr).await?, state).await
}

pub async fn serve_on(listener: TcpListener, state: AppState) -> Result<()> {
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn record_handler(State(state): State<AppState>) -> Response {
    match state.record().await.to_jsonl_string() {
        Ok(body) => body.into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, state))
}

fn encode(msgs: &[ServerMessage]) -> Vec<Message> {
    msgs.iter().map(|m| Message::Text(serde_json::to_string(m).expect("server messages serialize").into())).collect()
}

async fn send_all(socket: &mut WebSocket, msgs: Vec<Message>) -> bool {
    for m in msgs {
        if socket.send(m).await.is_err() {
            return false;
        }
    }
    true
}

async fn run_socket(mut socket: WebSocket, state: AppState) {
    let first = {
        let mut shared = state.inner.lock().await;
        if shared.connected {
            let busy = shared.session.error_message("another console is connected");
            drop(shared);
            let _ = send_all(&mut socket, encode(&[busy])).await;
            let _ = socket.close().await;
            return;
        }
        shared.connected = true;
        shared.session.resume()
    };
    let mut alive = match first {
        Ok(msgs) => send_all(&mut socket, encode(&msgs)).await,
        Err(_) => false,
    };
    while alive {
        let Some(Ok(msg)) = socket.next().await else { break };
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let (reply, closed_episode) = {
            let mut shared = state.inner.lock().await;
            let before = shared.session.episodes_done();
            let reply = shared.session.handle_json(&text);
            (reply, shared.session.episodes_done() > before)
        };
        match reply {
            Ok(msgs) => alive = send_all(&mut socket, encode(&msgs)).await,
            Err(e) => {
                let msg = state.inner.lock().await.session.error_message(&e.to_string());
                let _ = send_all(&mut socket, encode(&[msg])).await;
                alive = false;
            }
        }
        if closed_episode {
            state.save().await;
        }
    }
    let mut shared = state.inner.lock().await;
    shared.session.abort("console disconnected");
    shared.connected = false;
    drop(shared);
    state.save().await;
}

impl AppState {
    async fn save(&self) {
        if let Some(dir) = &self.out_dir {
            let record = self.record().await;
            let stem = format!("session-seed{}", record.meta.seed);
            if let Err(e) = record.save(dir, &stem) {
                eprintln!("could not save session record: {e}");
            }
        }
    }
}
