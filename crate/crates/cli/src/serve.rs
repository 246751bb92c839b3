use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use clap::Args;
use futures::{SinkExt, StreamExt};
use intent_core::live::{Event, ScenarioRef, Session};
use intent_core::{Error, Scenario};
use tokio::time::{sleep_until, Instant};

#[derive(Args)]
pub struct ServeArgs {
    /// Listen address; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Scenario for new sessions: a preset name.
    #[arg(long, default_value = "case1", conflicts_with = "scenario")]
    preset: String,
    /// Scenario JSON file for new sessions.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Base seed; a connection may override it with `?seed=`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct AppState {
    scenario: Scenario,
    seed: u64,
}

pub fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let scenario = match &args.scenario {
        Some(path) => Scenario::load(path)?,
        None => ScenarioRef::Name(args.preset.clone()).resolve()?,
    };
    let state = Arc::new(AppState { scenario, seed: args.seed });
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(Error::from)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr).await.map_err(Error::from)?;
        let local = listener.local_addr().map_err(Error::from)?;
        println!("listening on http://{local}");
        std::io::stdout().flush().ok();
        let app = Router::new()
            .route("/scenario", get(scenario_handler))
            .route("/ws", get(ws_handler))
            .with_state(state);
        axum::serve(listener, app).await.map_err(Error::from)?;
        Ok(())
    })
}

async fn scenario_handler(State(state): State<Arc<AppState>>) -> Response {
    let hello = Event::Hello {
        scenario: Box::new(state.scenario.clone()),
    };
    ([("content-type", "application/json")], hello.to_json()).into_response()
}

async fn ws_handler(
    ws: WebSocketUpgrade,
    Query(query): Query<HashMap<String, String>>,
    State(state): State<Arc<AppState>>,
) -> Response {
    let seed = match query.get("seed").map(|s| s.parse::<u64>().map_err(|_| s)) {
        None => state.seed,
        Some(Ok(s)) => s,
        Some(Err(s)) => return (StatusCode::BAD_REQUEST, format!("invalid seed '{s}'")).into_response(),
    };
    let session = match Session::new(state.scenario.clone(), seed) {
        Ok(s) => s,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    };
    ws.on_upgrade(move |socket| run_session(socket, session))
}

/// Owner task of one session: commands and ticks are handled in turn.
async fn run_session(socket: WebSocket, mut session: Session) {
    let (mut tx, mut rx) = socket.split();
    for ev in [session.hello(), session.state()] {
        if tx.send(Message::Text(ev.to_json().into())).await.is_err() {
            return;
        }
    }
    let mut next_tick = Instant::now() + session.tick_interval();
    loop {
        let events = tokio::select! {
            _ = sleep_until(next_tick) => {
                next_tick += session.tick_interval();
                let now = Instant::now();
                if next_tick < now {
                    // fell behind; do not burst
                    next_tick = now + session.tick_interval();
                }
                tokio::task::block_in_place(|| session.poll()).into_iter().collect::<Vec<_>>()
            }
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let rate = session.rate_hz();
                    let events = tokio::task::block_in_place(|| session.handle_command(text.as_str()));
                    if session.rate_hz() != rate {
                        next_tick = Instant::now() + session.tick_interval();
                    }
                    events
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => Vec::new(),
            },
        };
        for ev in events {
            if tx.send(Message::Text(ev.to_json().into())).await.is_err() {
                return;
            }
        }
    }
    log::debug!("session closed at step {}", session.step());
}
