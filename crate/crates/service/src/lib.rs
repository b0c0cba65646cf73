//! Control-plane service: zone editing, emergencies, simulation control and
//! a live event stream over HTTP.

pub mod api;
pub mod engine;
pub mod hub;

use std::net::SocketAddr;

use tokio::net::TcpListener;

pub use engine::{spawn, EngineHandle, EngineOptions};

/// Default capacity of each event-stream subscriber's buffer.
pub const STREAM_CAPACITY: usize = 4096;

/// Start the engine and serve the API on `listener` until the task ends.
pub async fn serve(listener: TcpListener, options: EngineOptions) -> std::io::Result<()> {
    let engine = spawn(options).map_err(|e| std::io::Error::other(e.message))?;
    axum::serve(listener, api::router(engine)).await
}

/// Bind an ephemeral local port and serve in the background. Used by tests
/// and by embedders that want the address back.
pub async fn serve_background(options: EngineOptions) -> std::io::Result<(SocketAddr, EngineHandle)> {
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let engine = spawn(options).map_err(|e| std::io::Error::other(e.message))?;
    let app = api::router(engine.clone());
    tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok((addr, engine))
}
