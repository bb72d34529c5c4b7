//! WebSocket front end: one human client per session, sessions paused on
//! disconnect and resumed by token.

use std::collections::HashMap;
use std::hash::{BuildHasher, Hasher};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use crate::protocol::{ClientMessage, EngineMessage};
use crate::session::{Session, SessionConfig, SessionError};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Template for new sessions; `log_path` is ignored in favour of
    /// `log_dir`.
    pub session: SessionConfig,
    /// Each session writes `session-<token>.jsonl` here.
    pub log_dir: Option<PathBuf>,
}

/// Maps wall-clock time onto session time, stopping while paused.
#[derive(Debug)]
pub struct LiveClock {
    started: Instant,
    paused_total: Duration,
    paused_at: Option<Instant>,
    factor: f64,
}

impl LiveClock {
    pub fn new(factor: f64) -> Self {
        LiveClock {
            started: Instant::now(),
            paused_total: Duration::ZERO,
            paused_at: None,
            factor,
        }
    }

    pub fn now(&self) -> f64 {
        let end = self.paused_at.unwrap_or_else(Instant::now);
        (end - self.started - self.paused_total).as_secs_f64() / self.factor
    }

    pub fn wall_at(&self, session_time: f64) -> Instant {
        self.started
            + self.paused_total
            + Duration::from_secs_f64((session_time * self.factor).max(0.0))
    }

    pub fn pause(&mut self) {
        self.paused_at.get_or_insert_with(Instant::now);
    }

    pub fn resume(&mut self) {
        if let Some(at) = self.paused_at.take() {
            self.paused_total += at.elapsed();
        }
    }
}

struct Live {
    session: Session,
    clock: LiveClock,
    connected: bool,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServerConfig>,
    sessions: Arc<Mutex<HashMap<String, Arc<Mutex<Live>>>>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState {
            config: Arc::new(config),
            sessions: Arc::default(),
        }
    }

    fn create(&self) -> Result<(String, Live), SessionError> {
        let token = format!(
            "{:016x}",
            std::collections::hash_map::RandomState::new()
                .build_hasher()
                .finish()
        );
        let mut cfg = self.config.session.clone();
        cfg.log_path = self
            .config
            .log_dir
            .as_ref()
            .map(|d| d.join(format!("session-{token}.jsonl")));
        let clock = LiveClock::new(cfg.realtime_factor);
        let session = Session::new(token.clone(), cfg)?;
        Ok((
            token,
            Live {
                session,
                clock,
                connected: true,
            },
        ))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new().route("/ws", get(upgrade)).with_state(state)
}

pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(config))).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn send_all(socket: &mut WebSocket, msgs: Vec<EngineMessage>) -> bool {
    for m in msgs {
        let text = serde_json::to_string(&m).expect("messages serialize");
        if socket.send(Message::Text(text)).await.is_err() {
            return false;
        }
    }
    true
}

fn error(message: impl Into<String>) -> Vec<EngineMessage> {
    vec![EngineMessage::Error {
        message: message.into(),
    }]
}

async fn attach(state: &AppState, token: Option<String>) -> Result<Arc<Mutex<Live>>, String> {
    let mut sessions = state.sessions.lock().await;
    match token {
        Some(t) => {
            let live = sessions
                .get(&t)
                .cloned()
                .ok_or_else(|| format!("unknown session {t}"))?;
            let mut l = live.lock().await;
            if l.connected {
                return Err(format!("session {t} already has a client"));
            }
            l.connected = true;
            l.clock.resume();
            drop(l);
            Ok(live)
        }
        None => {
            let (token, live) = state.create().map_err(|e| e.to_string())?;
            let live = Arc::new(Mutex::new(live));
            sessions.insert(token, live.clone());
            Ok(live)
        }
    }
}

async fn connection(mut socket: WebSocket, state: AppState) {
    let live = loop {
        match socket.recv().await {
            Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(&text) {
                Ok(ClientMessage::Join { token }) => match attach(&state, token).await {
                    Ok(live) => break live,
                    Err(e) => {
                        send_all(&mut socket, error(e)).await;
                        return;
                    }
                },
                Ok(_) => {
                    if !send_all(&mut socket, error("join first")).await {
                        return;
                    }
                }
                Err(e) => {
                    if !send_all(&mut socket, error(format!("bad message: {e}"))).await {
                        return;
                    }
                }
            },
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
            Some(Ok(_)) => {}
        }
    };
    let msgs = {
        let mut l = live.lock().await;
        let now = l.clock.now();
        l.session.join(now)
    };
    if !send_all(&mut socket, msgs).await {
        disconnect(&live).await;
        return;
    }
    loop {
        let wake = {
            let l = live.lock().await;
            l.session.next_wakeup().map(|t| (t, l.clock.wall_at(t)))
        };
        let sleep = async {
            match wake {
                Some((_, at)) => tokio::time::sleep_until(tokio::time::Instant::from_std(at)).await,
                None => std::future::pending::<()>().await,
            }
        };
        let msgs = tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(ClientMessage::HumanAction { kind, subtask, color }) => {
                        let mut l = live.lock().await;
                        let now = l.clock.now();
                        l.session.human_action(kind, subtask, color, now)
                    }
                    Ok(ClientMessage::Join { .. }) => error("already joined"),
                    Err(e) => error(format!("bad message: {e}")),
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => Vec::new(),
            },
            _ = sleep => {
                let mut l = live.lock().await;
                let t = wake.map_or(0.0, |w| w.0);
                let now = l.clock.now().max(t);
                l.session.advance(now)
            }
        };
        if !send_all(&mut socket, msgs).await {
            break;
        }
    }
    disconnect(&live).await;
}

async fn disconnect(live: &Arc<Mutex<Live>>) {
    let mut l = live.lock().await;
    let now = l.clock.now();
    l.session.advance(now);
    l.session.pause();
    l.clock.pause();
    l.connected = false;
    tracing::info!(token = l.session.token(), "client left; session paused");
}
