//! Starts the websocket server on a free port, connects a client, holds the
//! pointer on one block until the server acknowledges the intent, then shuts
//! the server down and prints where the trace went.

use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use jointaction_server::{ClientMessage, Server, ServerConfig, ServerMessage};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace_dir = std::env::temp_dir().join("jaf-live-example");
    let config = ServerConfig { port: 0, trace_dir: Some(trace_dir.clone()), ..ServerConfig::default() };
    let server = Server::bind(config).await?;
    let addr = server.local_addr()?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(server.run(async {
        let _ = stopped.await;
    }));

    let (mut ws, _) = connect_async(format!("ws://{addr}/ws")).await?;
    let send = |m: ClientMessage| Message::text(serde_json::to_string(&m).unwrap());
    ws.send(send(ClientMessage::Hello { condition: "gaze".into(), seed: Some(1) })).await?;

    let mut hovering = false;
    let mut ticker = tokio::time::interval(Duration::from_millis(33));
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                if hovering {
                    ws.send(send(ClientMessage::Gaze { block: Some(jointaction::BlockId(12)) })).await?;
                }
            }
            frame = ws.next() => {
                let Some(Ok(Message::Text(text))) = frame else { break };
                let msg: ServerMessage = serde_json::from_str(text.as_str())?;
                match msg {
                    ServerMessage::State(s) if s.full => {
                        println!("t = {:.2}: snapshot, robot {}", s.t, s.robot_phase);
                        hovering = true;
                    }
                    ServerMessage::IntentAck { block } => {
                        println!("intent acknowledged for block {block}");
                        break;
                    }
                    _ => {}
                }
            }
        }
    }
    drop(ws);
    stop.send(()).ok();
    handle.await??;
    println!("trace written to {}", trace_dir.join("session-1.jsonl").display());
    Ok(())
}
