//! HTTP front end for the multiprogramming scheduler.
//!
//! A [`Service`] owns the scheduler, the journal and a backend. The
//! dispatcher task wakes once per cycle, packs whatever the scheduler hands
//! out, runs it on a blocking thread and journals the outcome.

mod config;
mod http;
pub mod journal;
mod service;

use std::sync::Arc;

use qsched_core::queue::SystemClock;
use tokio::sync::watch;
use tracing::{error, info};

pub use config::ServiceConfig;
pub use http::router;
pub use service::{backend_from_config, ApiError, JobView, Service, SubmitFormat, SubmitRequest, Timings};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("journal: {0}")]
    Journal(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs the cycle loop until `shutdown` flips to true.
pub async fn run_dispatcher(service: Service, mut shutdown: watch::Receiver<bool>) {
    let cycle = service.config().scheduler.cycle_duration;
    let strict = service.config().strict_serial;
    let mut interval = tokio::time::interval(cycle);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    interval.tick().await;
    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = shutdown.changed() => break,
        }
        if let Err(e) = service.prune() {
            error!(error = %e, "pruning failed");
        }
        let batch = match service.tick() {
            Ok(Some(b)) => b,
            Ok(None) => continue,
            Err(e) => {
                error!(error = %e, "dispatch failed");
                continue;
            }
        };
        let svc = service.clone();
        let handle = tokio::task::spawn_blocking(move || {
            if let Err(e) = svc.run_batch(&batch) {
                error!(error = %e, "recording batch result failed");
            }
        });
        if strict {
            let _ = handle.await;
        }
    }
}

/// Opens the journal, binds the listener and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let backend = backend_from_config(&config)?;
    let listen = config.listen.clone();
    let service = Service::open(config, backend, Arc::new(SystemClock))?;
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    info!(addr = %listener.local_addr()?, capacity = service.capacity(), "listening");

    let (tx, rx) = watch::channel(false);
    let dispatcher = tokio::spawn(run_dispatcher(service.clone(), rx));
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    let _ = tx.send(true);
    let _ = dispatcher.await;
    Ok(())
}
