use std::fs::File;
use std::io::{BufRead, BufReader};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::http::HeaderValue;
use tokio::io::AsyncBufReadExt;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use truthy_core::ingest::Pacer;
use truthy_core::Pipeline;

use crate::api::{self, SharedPipeline};
use crate::cli::CliError;

pub struct ServeOptions {
    pub host: IpAddr,
    pub port: u16,
    pub input: Option<PathBuf>,
    pub pacer: Pacer,
    pub listen: Option<u16>,
    pub cors_origin: Option<HeaderValue>,
}

/// Replays `path` into the pipeline. The lock is released while pacing.
/// Returns true if the whole file was consumed.
fn replay_file(pipeline: &SharedPipeline, path: &PathBuf, mut pacer: Pacer, stop: &AtomicBool) -> Result<bool, CliError> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot read `{}`: {e}", path.display())))?;
    let mut apply = |ready: Vec<truthy_core::Tweet>| -> Result<(), CliError> {
        for tweet in ready {
            pacer.pace(tweet.created_at);
            api::write(pipeline).process(tweet).map_err(CliError::runtime)?;
        }
        Ok(())
    };
    for line in BufReader::new(file).split(b'\n') {
        if stop.load(Ordering::Relaxed) {
            return Ok(false);
        }
        let line = line.map_err(CliError::runtime)?;
        let ready = api::write(pipeline).ingest_line(&line);
        apply(ready)?;
    }
    let ready = api::write(pipeline).flush_buffer();
    apply(ready)?;
    tracing::info!("input `{}` fully replayed", path.display());
    Ok(true)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

/// Feeds socket lines into the pipeline from a single thread.
fn socket_worker(pipeline: SharedPipeline, mut rx: mpsc::Receiver<Vec<u8>>) -> JoinHandle<Result<(), CliError>> {
    std::thread::spawn(move || {
        while let Some(line) = rx.blocking_recv() {
            api::write(&pipeline).push_line(&line).map_err(CliError::runtime)?;
        }
        Ok(())
    })
}

async fn accept_loop(listener: TcpListener, tx: mpsc::Sender<Vec<u8>>) {
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(conn) => conn,
            Err(e) => {
                tracing::warn!("accept failed: {e}");
                continue;
            }
        };
        tracing::info!("ingest connection from {peer}");
        let tx = tx.clone();
        tokio::spawn(async move {
            let mut reader = tokio::io::BufReader::new(stream);
            let mut line = Vec::new();
            loop {
                line.clear();
                match reader.read_until(b'\n', &mut line).await {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(line.clone()).await.is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        tracing::warn!("ingest connection {peer}: {e}");
                        break;
                    }
                }
            }
        });
    }
}

pub fn serve(pipeline: Pipeline, opts: ServeOptions) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::runtime)?;
    let pipeline = api::shared(pipeline);
    let stop = Arc::new(AtomicBool::new(false));

    let app = api::router(Arc::clone(&pipeline), opts.cors_origin.clone());
    let http = runtime
        .block_on(TcpListener::bind(SocketAddr::new(opts.host, opts.port)))
        .map_err(|e| CliError::Runtime(format!("cannot bind {}:{}: {e}", opts.host, opts.port)))?;
    let ingest = match opts.listen {
        Some(port) => Some(
            runtime
                .block_on(TcpListener::bind(SocketAddr::new(opts.host, port)))
                .map_err(|e| CliError::Runtime(format!("cannot bind ingest port {port}: {e}")))?,
        ),
        None => None,
    };
    tracing::info!("serving on http://{}", http.local_addr().map_err(CliError::runtime)?);

    let file_worker = opts.input.clone().map(|path| {
        let (pipeline, stop) = (Arc::clone(&pipeline), Arc::clone(&stop));
        let pacer = opts.pacer;
        std::thread::spawn(move || replay_file(&pipeline, &path, pacer, &stop))
    });
    let (socket_task, socket_thread) = match ingest {
        Some(listener) => {
            let (tx, rx) = mpsc::channel(4096);
            (Some(runtime.spawn(accept_loop(listener, tx))), Some(socket_worker(Arc::clone(&pipeline), rx)))
        }
        None => (None, None),
    };

    let served = runtime.block_on(async { axum::serve(http, app).with_graceful_shutdown(shutdown_signal()).await });

    stop.store(true, Ordering::Relaxed);
    let mut input_complete = true;
    if let Some(handle) = file_worker {
        match handle.join().expect("replay thread panicked") {
            Ok(done) => input_complete = done,
            Err(e) => tracing::error!("{e}"),
        }
    }
    if let Some(task) = socket_task {
        task.abort();
    }
    runtime.shutdown_background();
    if let Some(handle) = socket_thread {
        if let Err(e) = handle.join().expect("ingest thread panicked") {
            tracing::error!("{e}");
        }
    }

    let mut p = api::write(&pipeline);
    // A partially read input file is re-read on restart, so its buffered
    // tweets stay out of the log.
    if input_complete {
        for tweet in p.flush_buffer() {
            p.process(tweet).map_err(CliError::runtime)?;
        }
    }
    p.checkpoint().map_err(CliError::runtime)?;
    tracing::info!("state checkpointed at log offset {}", p.log_len());
    served.map_err(CliError::runtime)
}
