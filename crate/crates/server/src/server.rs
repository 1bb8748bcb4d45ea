//! Websocket host: one [`Session`] per connection, each on its own task.

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;
use tokio_util::sync::CancellationToken;
use tokio_util::task::TaskTracker;
use tower_http::services::ServeDir;

use crate::session::{Session, SessionConfig};

pub const DEFAULT_PORT: u16 = 8090;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub tick_hz: f64,
    /// Session traces are written here as `session-<id>.jsonl`.
    pub trace_dir: Option<PathBuf>,
    /// Static files served next to `/ws`, e.g. a built browser client.
    pub static_dir: Option<PathBuf>,
    pub session: SessionConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            tick_hz: 30.0,
            trace_dir: None,
            static_dir: None,
            session: SessionConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("tick rate must be positive, got {0}")]
    TickRate(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Shared {
    config: ServerConfig,
    next_id: AtomicU64,
    cancel: CancellationToken,
    tracker: TaskTracker,
}

/// A bound but not yet running server.
pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    pub async fn bind(config: ServerConfig) -> Result<Server, ServerError> {
        if !(config.tick_hz > 0.0) {
            return Err(ServerError::TickRate(config.tick_hz));
        }
        let addr = format!("{}:{}", config.host, config.port);
        let listener = TcpListener::bind(&addr).await.map_err(|source| ServerError::Bind { addr, source })?;
        if let Some(dir) = &config.trace_dir {
            std::fs::create_dir_all(dir)?;
        }
        let shared = Arc::new(Shared {
            config,
            next_id: AtomicU64::new(1),
            cancel: CancellationToken::new(),
            tracker: TaskTracker::new(),
        });
        Ok(Server { listener, shared })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then ends every live session and
    /// waits for their traces to be written.
    pub async fn run<F>(self, shutdown: F) -> Result<(), ServerError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        let shared = self.shared;
        let mut app = Router::new().route("/ws", get(upgrade)).with_state(shared.clone());
        if let Some(dir) = &shared.config.static_dir {
            app = app.fallback_service(ServeDir::new(dir));
        }
        tracing::info!(addr = %self.listener.local_addr()?, "listening");
        let cancel = shared.cancel.clone();
        axum::serve(self.listener, app)
            .with_graceful_shutdown(async move {
                shutdown.await;
                cancel.cancel();
            })
            .await?;
        shared.cancel.cancel();
        shared.tracker.close();
        shared.tracker.wait().await;
        Ok(())
    }
}

/// Binds and serves until `shutdown` resolves.
pub async fn serve<F>(config: ServerConfig, shutdown: F) -> Result<(), ServerError>
where
    F: Future<Output = ()> + Send + 'static,
{
    Server::bind(config).await?.run(shutdown).await
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    let tracker = shared.tracker.clone();
    ws.on_upgrade(move |socket| tracker.track_future(connection(socket, shared)))
}

async fn connection(mut socket: WebSocket, shared: Arc<Shared>) {
    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let mut session = Session::new(id, shared.config.session.clone());
    let start = Instant::now();
    let mut ticks = tokio::time::interval(Duration::from_secs_f64(1.0 / shared.config.tick_hz));
    ticks.set_missed_tick_behavior(MissedTickBehavior::Skip);
    tracing::info!(session = id, "connected");

    loop {
        let out = tokio::select! {
            _ = shared.cancel.cancelled() => {
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
            _ = ticks.tick() => session.tick(start.elapsed().as_secs_f64()),
            frame = socket.recv() => match frame {
                Some(Ok(Message::Text(text))) => session.handle_text(start.elapsed().as_secs_f64(), &text),
                Some(Ok(Message::Binary(_))) => {
                    vec![crate::protocol::ServerMessage::reject("malformed", "binary frames are not supported")]
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => continue,
            },
        };
        if send_all(&mut socket, &out).await.is_err() {
            break;
        }
        if session.is_closed() {
            let _ = socket.send(Message::Close(None)).await;
            break;
        }
    }

    if let (Some(dir), Some(trace)) = (&shared.config.trace_dir, session.trace()) {
        let path = trace_path(dir, id);
        match std::fs::write(&path, trace.to_jsonl()) {
            Ok(()) => tracing::info!(session = id, path = %path.display(), "trace written"),
            Err(e) => tracing::error!(session = id, error = %e, "cannot write trace"),
        }
    }
    tracing::info!(session = id, finished = session.is_closed(), "disconnected");
}

async fn send_all(socket: &mut WebSocket, out: &[crate::protocol::ServerMessage]) -> Result<(), axum::Error> {
    for m in out {
        socket.send(Message::Text(m.to_json().into())).await?;
    }
    Ok(())
}

pub fn trace_path(dir: &Path, session: u64) -> PathBuf {
    dir.join(format!("session-{session}.jsonl"))
}
