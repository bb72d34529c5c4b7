//! A console client that does whatever the robot asks, over the WebSocket
//! protocol. Starts its own server unless a URL is given.
//!
//! cargo run -p cobot-service --example follower_client -- [ws://host:port/ws]

use std::collections::BTreeMap;

use cobot_core::task::{ActionKind, Color, TaskId};
use cobot_service::protocol::{ClientMessage, EngineMessage};
use cobot_service::server::{serve, ServerConfig};
use cobot_service::session::SessionConfig;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let url = match std::env::args().nth(1) {
        Some(url) => url,
        None => {
            let listener = TcpListener::bind("127.0.0.1:0").await?;
            let addr = listener.local_addr()?;
            let session = SessionConfig {
                realtime_factor: 0.01,
                ..SessionConfig::default()
            };
            tokio::spawn(serve(
                listener,
                ServerConfig {
                    session,
                    log_dir: None,
                },
            ));
            format!("ws://{addr}/ws")
        }
    };
    let (mut ws, _) = connect_async(url.as_str()).await?;
    let send = |m: ClientMessage| Message::Text(serde_json::to_string(&m).expect("serializable"));
    ws.send(send(ClientMessage::Join { token: None })).await?;

    let mut pending: BTreeMap<TaskId, Color> = BTreeMap::new();
    let mut red = false;
    while let Some(msg) = ws.next().await {
        let Message::Text(text) = msg? else { continue };
        let m: EngineMessage = serde_json::from_str(&text)?;
        match &m {
            EngineMessage::AssignmentNotice { subtask, color } => {
                println!("robot asks for {color} on {subtask}");
                pending.insert(*subtask, *color);
            }
            EngineMessage::RobotAction { action, status, .. } => {
                println!("robot {action} {status:?}")
            }
            EngineMessage::LightState { red: r, .. } => red = *r,
            EngineMessage::ActionRejected { action, reason } => {
                println!("{action} rejected: {reason}")
            }
            EngineMessage::TaskComplete { makespan } => {
                println!("done in {makespan:.1} s");
                break;
            }
            _ => {}
        }
        if !red {
            if let Some((&subtask, &color)) = pending.iter().next() {
                pending.remove(&subtask);
                println!("placing {color} on {subtask}");
                ws.send(send(ClientMessage::HumanAction {
                    kind: ActionKind::H4,
                    subtask,
                    color: Some(color),
                }))
                .await?;
            }
        }
    }
    Ok(())
}
