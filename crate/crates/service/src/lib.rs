//! HTTP interface to MAIA studies.
//!
//! Facilitator tokens control the round lifecycle; respondent tokens submit,
//! read their own submission and read feedback once a round is briefed.
//! Every mutation is appended to the study's event log before it is
//! acknowledged.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;
pub mod tokens;

use std::sync::Arc;

pub use config::ServiceConfig;
pub use error::{ApiError, ErrorBody};
pub use routes::router;
pub use state::{ClockFactory, Service};

/// Serve on an already-bound listener until ctrl-c.
pub async fn serve(
    service: Arc<Service>,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Load the archive directory, bind the configured address and serve.
pub async fn run(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let addr = config.addr.clone();
    let service = Arc::new(Service::open(config).map_err(|e| e.message)?);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    eprintln!("maia: listening on http://{}", listener.local_addr()?);
    serve(service, listener).await?;
    Ok(())
}
