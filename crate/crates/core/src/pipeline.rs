//! Ingest, route, log and apply, with crash recovery.
//!
//! State directory layout:
//!
//! ```text
//! log/              event log segments and manifest
//! snapshot.json     engine state covering a prefix of the log
//! annotations.jsonl append-only annotation log
//! spill/            networks evicted under a memory cap
//! ```
//!
//! On open, the snapshot is loaded and the log tail after it is re-applied.
//! Input is expected to be re-read from the start after a restart; tweets
//! already in the log are dropped as duplicates and tagging tweets already
//! recorded are skipped. Recovered state equals an uninterrupted run as long
//! as input disorder stays within the reorder window.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::thread::JoinHandle;

use chrono::Duration;
use thiserror::Error;

use crate::annotations::{AnnotationError, AnnotationStore};
use crate::engine::{Engine, EngineConfig, EngineError, EngineState};
use crate::ingest::{IngestCounters, Ingestor, Pacer, DEFAULT_REORDER_WINDOW_SECS};
use crate::storage::{read_snapshot, write_snapshot, EventLog, LogEntry, StorageError, DEFAULT_SEGMENT_RECORDS};
use crate::tweet::Tweet;

pub const DEFAULT_SNAPSHOT_EVERY: u64 = 50_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("cannot read input: {0}")]
    Input(#[from] std::io::Error),
}

impl From<AnnotationError> for PipelineError {
    fn from(e: AnnotationError) -> Self {
        PipelineError::Engine(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Tweets appended between snapshots.
    pub snapshot_every: u64,
    pub segment_records: u64,
    pub reorder_window: Duration,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            segment_records: DEFAULT_SEGMENT_RECORDS,
            reorder_window: Duration::seconds(DEFAULT_REORDER_WINDOW_SECS),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    /// Log offset covered by the loaded snapshot.
    pub snapshot_offset: Option<u64>,
    /// Log entries re-applied after the snapshot.
    pub replayed: u64,
    pub warnings: Vec<String>,
}

struct Persistence {
    dir: PathBuf,
    log: EventLog,
    snapshot_every: u64,
    since_snapshot: u64,
    writer: Option<JoinHandle<Result<(), StorageError>>>,
}

impl Persistence {
    fn snapshot_path(&self) -> PathBuf {
        self.dir.join("snapshot.json")
    }

    fn join_writer(&mut self) -> Result<(), StorageError> {
        match self.writer.take() {
            Some(handle) => handle.join().expect("snapshot writer panicked"),
            None => Ok(()),
        }
    }
}

pub struct Pipeline {
    ingestor: Ingestor,
    engine: Engine,
    persistence: Option<Persistence>,
    recovery: RecoveryReport,
}

impl Pipeline {
    /// A pipeline without durable state.
    pub fn in_memory(engine: Engine) -> Self {
        Self { ingestor: Ingestor::default(), engine, persistence: None, recovery: RecoveryReport::default() }
    }

    pub fn with_window(mut self, window: Duration) -> Self {
        self.ingestor = Ingestor::new(window);
        self
    }

    /// Opens or creates the state directory and recovers from it.
    pub fn open(dir: &Path, config: EngineConfig, options: PipelineOptions) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir).map_err(StorageError::from)?;
        let annotations = AnnotationStore::open(&dir.join("annotations.jsonl"))?;
        let mut engine = Engine::new(config)
            .with_annotations(annotations)
            .with_spill_dir(&dir.join("spill"))?;
        let log = EventLog::open_with(&dir.join("log"), options.segment_records)?;
        let mut report = RecoveryReport { warnings: log.warnings().to_vec(), ..Default::default() };

        let snapshot_path = dir.join("snapshot.json");
        let mut start = 0;
        if let Some(snap) = read_snapshot::<EngineState>(&snapshot_path)? {
            if snap.log_offset <= log.len() {
                engine.restore(snap.state)?;
                start = snap.log_offset;
                report.snapshot_offset = Some(start);
            } else {
                let msg = format!(
                    "snapshot covers {} log entries but only {} survive; rebuilding from the log",
                    snap.log_offset,
                    log.len()
                );
                tracing::warn!("{msg}");
                report.warnings.push(msg);
            }
        }
        for entry in log.read_from(start)? {
            let LogEntry { tweet, themes } = entry?;
            let routed = engine.reroute(tweet, themes);
            engine.commit(routed)?;
            report.replayed += 1;
        }

        let mut ingestor = Ingestor::new(options.reorder_window);
        let last = engine.tweets().map(|t| t.created_at).max();
        ingestor.restore(engine.tweets().map(|t| t.id), last);
        tracing::info!(
            snapshot = ?report.snapshot_offset,
            replayed = report.replayed,
            tweets = engine.tweet_count(),
            "recovered state"
        );

        Ok(Self {
            ingestor,
            engine,
            persistence: Some(Persistence {
                dir: dir.to_path_buf(),
                log,
                snapshot_every: options.snapshot_every.max(1),
                since_snapshot: report.replayed,
                writer: None,
            }),
            recovery: report,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn ingest_counters(&self) -> &IngestCounters {
        self.ingestor.counters()
    }

    pub fn recovery(&self) -> &RecoveryReport {
        &self.recovery
    }

    /// Entries in the durable log, zero when in memory.
    pub fn log_len(&self) -> u64 {
        self.persistence.as_ref().map_or(0, |p| p.log.len())
    }

    /// Parses and buffers one line, returning tweets whose order is settled.
    pub fn ingest_line(&mut self, line: &[u8]) -> Vec<Tweet> {
        self.ingestor.push_line(line);
        self.drain()
    }

    fn drain(&mut self) -> Vec<Tweet> {
        std::iter::from_fn(|| self.ingestor.pop_ready()).collect()
    }

    /// Ends the input: every buffered tweet is released.
    pub fn flush_buffer(&mut self) -> Vec<Tweet> {
        self.ingestor.finish();
        self.drain()
    }

    /// Applies one released tweet: annotation check, routing, durable append
    /// for routed tweets, then the state update.
    pub fn process(&mut self, tweet: Tweet) -> Result<(), PipelineError> {
        self.engine.observe_annotation(&tweet)?;
        let routed = self.engine.route(tweet);
        if routed.is_routed() {
            if let Some(p) = &mut self.persistence {
                p.log.append(&LogEntry { tweet: routed.tweet.clone(), themes: routed.themes.clone() })?;
                p.since_snapshot += 1;
            }
        }
        self.engine.commit(routed)?;
        if self.persistence.as_ref().is_some_and(|p| p.since_snapshot >= p.snapshot_every) {
            self.start_snapshot()?;
        }
        Ok(())
    }

    /// `ingest_line` followed by `process` for each released tweet.
    pub fn push_line(&mut self, line: &[u8]) -> Result<usize, PipelineError> {
        let ready = self.ingest_line(line);
        let n = ready.len();
        for tweet in ready {
            self.process(tweet)?;
        }
        Ok(n)
    }

    /// Processes every line of `source`, then flushes the reorder buffer.
    pub fn run(&mut self, source: impl BufRead, mut pacer: Option<Pacer>) -> Result<(), PipelineError> {
        let mut handle = |p: &mut Self, ready: Vec<Tweet>| -> Result<(), PipelineError> {
            for tweet in ready {
                if let Some(pacer) = &mut pacer {
                    pacer.pace(tweet.created_at);
                }
                p.process(tweet)?;
            }
            Ok(())
        };
        for line in source.split(b'\n') {
            let ready = self.ingest_line(&line?);
            handle(self, ready)?;
        }
        let ready = self.flush_buffer();
        handle(self, ready)
    }

    fn start_snapshot(&mut self) -> Result<(), PipelineError> {
        let Some(p) = &mut self.persistence else { return Ok(()) };
        p.join_writer()?;
        p.log.sync()?;
        let state = self.engine.state()?;
        let offset = p.log.len();
        let path = p.snapshot_path();
        p.since_snapshot = 0;
        p.writer = Some(std::thread::spawn(move || write_snapshot(&path, offset, &state)));
        Ok(())
    }

    /// Makes everything processed so far durable: log, snapshot, annotations.
    pub fn checkpoint(&mut self) -> Result<(), PipelineError> {
        self.engine.flush_annotations()?;
        let Some(p) = &mut self.persistence else { return Ok(()) };
        p.join_writer()?;
        p.log.sync()?;
        let state = self.engine.state()?;
        write_snapshot(&p.snapshot_path(), p.log.len(), &state)?;
        p.since_snapshot = 0;
        Ok(())
    }
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        if let Some(p) = &mut self.persistence {
            if let Err(e) = p.join_writer() {
                tracing::warn!("snapshot write failed: {e}");
            }
        }
    }
}
