//! WebSocket front end for a running pipeline.
//!
//! Each connection gets its own subscriber queue. Published frames go out as
//! binary messages in the wire format of
//! [`trainer_core::service::protocol`], events and control replies as text.
//! Binary frames sent by a client are fed to the `stub:<stream>` source of
//! the same name, e.g. ultrasound frames to `stub:us`.

use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use trainer_core::service::protocol::{decode_frame, encode_frame};
use trainer_core::service::{PipelineHandle, Published};

/// Outgoing messages buffered per connection on top of the subscriber queue.
const OUTBOX: usize = 16;

fn error_reply(code: &str, message: String) -> String {
    json!({"re": Value::Null, "ok": false, "error": {"code": code, "message": message}}).to_string()
}

/// Accepts clients until the pipeline finishes.
pub async fn serve(listener: TcpListener, pipeline: Arc<PipelineHandle>, queue: usize) -> std::io::Result<()> {
    let mut tick = tokio::time::interval(Duration::from_millis(50));
    loop {
        tokio::select! {
            accepted = listener.accept() => {
                let (stream, peer) = accepted?;
                log::info!("client connected from {peer}");
                let p = pipeline.clone();
                tokio::spawn(async move {
                    if let Err(e) = handle_connection(stream, p, queue).await {
                        log::warn!("client {peer}: {e}");
                    }
                    log::info!("client {peer} disconnected");
                });
            }
            _ = tick.tick() => {
                if pipeline.is_finished() {
                    return Ok(());
                }
            }
        }
    }
}

async fn handle_connection(stream: TcpStream, pipeline: Arc<PipelineHandle>, queue: usize) -> anyhow::Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut incoming) = ws.split();

    let p = pipeline.clone();
    let subscription = tokio::task::spawn_blocking(move || p.subscribe(queue)).await??;
    let (out_tx, mut out_rx) = mpsc::channel::<Message>(OUTBOX);

    // Bridges the blocking subscriber queue into the async outbox.
    let pump_tx = out_tx.clone();
    let pump = std::thread::Builder::new().name("ws-publish".into()).spawn(move || loop {
        let Some(item) = subscription.recv_timeout(Duration::from_millis(100)) else {
            if subscription.is_closed() || pump_tx.is_closed() {
                return;
            }
            continue;
        };
        let msg = match item {
            Published::Frame(f) => match encode_frame(&f) {
                Ok(bytes) => Message::Binary(bytes),
                Err(e) => {
                    log::warn!("not publishing frame: {e}");
                    continue;
                }
            },
            Published::Event(e) => Message::Text(e.to_string()),
        };
        if pump_tx.blocking_send(msg).is_err() {
            return;
        }
    })?;

    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            if sink.send(msg).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(msg) = incoming.next().await {
        let reply = match msg? {
            Message::Text(text) => {
                let p = pipeline.clone();
                Some(tokio::task::spawn_blocking(move || p.handle_text(&text)).await?)
            }
            Message::Binary(bytes) => match decode_frame(&bytes) {
                Ok(frame) => {
                    let id = frame.stream_id.as_str();
                    if pipeline.push_frame(id, frame) {
                        None
                    } else {
                        Some(error_reply("no_stub_source", format!("no stub:{id} source is configured")))
                    }
                }
                Err(e) => Some(error_reply("bad_frame", e.to_string())),
            },
            Message::Close(_) => break,
            _ => None,
        };
        if let Some(r) = reply {
            if out_tx.send(Message::Text(r)).await.is_err() {
                break;
            }
        }
    }
    drop(out_tx);
    writer.abort();
    let _ = tokio::task::spawn_blocking(move || pump.join()).await;
    Ok(())
}
