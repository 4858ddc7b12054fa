//! Battleships game server.
//!
//! Every flag can also come from the environment, e.g.
//! `BATTLESHIP_LISTEN=0.0.0.0:8080 BATTLESHIP_DATA_DIR=/var/lib/battleship battleship-server`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use tracing_subscriber::EnvFilter;

use battleship_service::http::router;
use battleship_service::{GameService, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "battleship-server",
    version,
    about = "Serves two-player Battleships games over HTTP and WebSocket"
)]
struct Opts {
    #[arg(long, env = "BATTLESHIP_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Wall-clock milliseconds per arbiter tick. 0 stops the clock.
    #[arg(long, env = "BATTLESHIP_TICK_MS", default_value_t = 1000)]
    tick_ms: u64,
    /// Directory for per-game event logs. Without it games live in memory.
    #[arg(long, env = "BATTLESHIP_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Allow `POST /games/{id}/clock`.
    #[arg(long, env = "BATTLESHIP_TEST_MODE")]
    test_mode: bool,
    /// Ticks an unjoined game stays open.
    #[arg(long, env = "BATTLESHIP_LOBBY_EXPIRY_TICKS")]
    lobby_expiry_ticks: Option<u64>,
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let opts = Opts::parse();
    let service = GameService::open(ServiceConfig {
        data_dir: opts.data_dir.clone(),
        lobby_expiry_ticks: opts.lobby_expiry_ticks,
        test_mode: opts.test_mode,
    })
    .context("restoring games")?;
    if opts.tick_ms > 0 {
        service.spawn_scheduler(Duration::from_millis(opts.tick_ms));
    }
    let listener = tokio::net::TcpListener::bind(opts.listen)
        .await
        .with_context(|| format!("binding {}", opts.listen))?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = ?opts.data_dir, test_mode = opts.test_mode, "listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
