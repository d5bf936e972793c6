//! Transports for the session protocol: WebSocket at `/api` next to the
//! static UI bundle at `/`, and line-delimited JSON over stdio.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tower_http::services::ServeDir;

use crate::session::Sessions;

pub fn router(sessions: Arc<Sessions>, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new().route("/api", get(upgrade)).with_state(sessions);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(sessions): State<Arc<Sessions>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, sessions))
}

async fn connection(mut socket: WebSocket, sessions: Arc<Sessions>) {
    // Messages of one connection are answered strictly in order.
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        let s = sessions.clone();
        let Ok(out) = tokio::task::spawn_blocking(move || s.handle_line(&text)).await else {
            break;
        };
        for line in out {
            if socket.send(Message::Text(line.into())).await.is_err() {
                return;
            }
        }
    }
}

/// Binds `addr` and serves until the process ends. `ready` receives the
/// bound address.
pub async fn serve(
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    ready: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    ready(listener.local_addr()?);
    axum::serve(listener, router(Arc::new(Sessions::new()), static_dir)).await
}

/// One request per input line, one response or notification per output line.
pub fn serve_stdio(input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let sessions = Sessions::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for out in sessions.handle_line(&line) {
            writeln!(output, "{out}")?;
        }
        output.flush()?;
    }
    Ok(())
}
