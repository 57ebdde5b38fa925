//! Durable event log, state snapshots, spill files and exports.

mod eventlog;
mod export;
mod snapshot;
mod spill;

use thiserror::Error;

pub use eventlog::{EventLog, LogEntry, LogReader, Manifest, SegmentInfo, DEFAULT_SEGMENT_RECORDS};
pub use export::{export_network, ExportFormat, EDGELIST_HEADER};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotFile};
pub use spill::SpillStore;

pub(crate) use eventlog::write_atomic;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt {what}: {reason}")]
    Corrupt { what: String, reason: String },
    #[error("unknown export format `{0}` (expected edgelist, graphml or json)")]
    UnknownFormat(String),
}
