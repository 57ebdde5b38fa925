//! Segmented, checksummed, append-only log of accepted tweets.
//!
//! Layout under the log directory:
//!
//! ```text
//! manifest.json          {"segments":[{"segment":0,"first_id":..,"last_id":..,"count":..,"digest":".."}]}
//! segment-000000.log     sealed, listed in the manifest with its SHA-256
//! segment-000001.log     active tail, not yet in the manifest
//! ```
//!
//! Each line is `<crc32 as 8 hex digits>\t<json entry>\n`. Sealed segments
//! must match their manifest digest on open. The active segment is scanned
//! record by record and truncated at the first record that fails to verify.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StorageError;
use crate::tweet::Tweet;

pub const DEFAULT_SEGMENT_RECORDS: u64 = 10_000;
const MANIFEST: &str = "manifest.json";

/// One accepted tweet with the themes it was routed to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tweet: Tweet,
    pub themes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub segment: u32,
    pub first_id: u64,
    pub last_id: u64,
    pub count: u64,
    pub digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub segments: Vec<SegmentInfo>,
}

struct ActiveSegment {
    index: u32,
    file: File,
    count: u64,
    first_id: u64,
    last_id: u64,
    hasher: Sha256,
}

pub struct EventLog {
    dir: PathBuf,
    segment_records: u64,
    manifest: Manifest,
    active: ActiveSegment,
    sealed_records: u64,
    warnings: Vec<String>,
}

fn segment_path(dir: &Path, index: u32) -> PathBuf {
    dir.join(format!("segment-{index:06}.log"))
}

fn encode_line(entry: &LogEntry) -> Vec<u8> {
    let json = serde_json::to_vec(entry).expect("log entry serializes");
    let crc = crc32fast::hash(&json);
    let mut line = Vec::with_capacity(json.len() + 10);
    line.extend_from_slice(format!("{crc:08x}\t").as_bytes());
    line.extend_from_slice(&json);
    line.push(b'\n');
    line
}

fn decode_line(line: &[u8]) -> Result<LogEntry, String> {
    let body = line.strip_suffix(b"\n").ok_or("record is not newline-terminated")?;
    if body.len() < 9 || body[8] != b'\t' {
        return Err("missing checksum prefix".into());
    }
    let crc = std::str::from_utf8(&body[..8])
        .ok()
        .and_then(|s| u32::from_str_radix(s, 16).ok())
        .ok_or("bad checksum prefix")?;
    let json = &body[9..];
    if crc32fast::hash(json) != crc {
        return Err("checksum mismatch".into());
    }
    serde_json::from_slice(json).map_err(|e| e.to_string())
}

/// Writes `bytes` to `path` through a temporary file and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

impl EventLog {
    pub fn open(dir: &Path) -> Result<Self, StorageError> {
        Self::open_with(dir, DEFAULT_SEGMENT_RECORDS)
    }

    pub fn open_with(dir: &Path, segment_records: u64) -> Result<Self, StorageError> {
        assert!(segment_records > 0, "segments must hold at least one record");
        fs::create_dir_all(dir)?;
        let manifest_path = dir.join(MANIFEST);
        let manifest: Manifest = if manifest_path.exists() {
            serde_json::from_slice(&fs::read(&manifest_path)?).map_err(|e| StorageError::Corrupt {
                what: manifest_path.display().to_string(),
                reason: e.to_string(),
            })?
        } else {
            Manifest::default()
        };

        let mut sealed_records = 0;
        for (i, info) in manifest.segments.iter().enumerate() {
            let path = segment_path(dir, info.segment);
            if info.segment as usize != i {
                return Err(StorageError::Corrupt {
                    what: MANIFEST.into(),
                    reason: format!("segment {} listed at position {i}", info.segment),
                });
            }
            let bytes = fs::read(&path).map_err(|e| StorageError::Corrupt {
                what: path.display().to_string(),
                reason: e.to_string(),
            })?;
            let digest = hex::encode(Sha256::digest(&bytes));
            if digest != info.digest {
                return Err(StorageError::Corrupt {
                    what: path.display().to_string(),
                    reason: format!("digest {digest} does not match manifest {}", info.digest),
                });
            }
            sealed_records += info.count;
        }

        let index = manifest.segments.len() as u32;
        let (active, warnings) = Self::recover_active(dir, index)?;
        let mut log = Self { dir: dir.to_path_buf(), segment_records, manifest, active, sealed_records, warnings };
        if log.active.count >= log.segment_records {
            log.seal()?;
        }
        Ok(log)
    }

    fn recover_active(dir: &Path, index: u32) -> Result<(ActiveSegment, Vec<String>), StorageError> {
        let path = segment_path(dir, index);
        let mut warnings = Vec::new();
        let mut active = ActiveSegment {
            index,
            file: OpenOptions::new().create(true).read(true).append(true).open(&path)?,
            count: 0,
            first_id: 0,
            last_id: 0,
            hasher: Sha256::new(),
        };
        let mut bytes = Vec::new();
        File::open(&path)?.read_to_end(&mut bytes)?;

        let mut verified = 0usize;
        for line in bytes.split_inclusive(|&b| b == b'\n') {
            match decode_line(line) {
                Ok(entry) => {
                    if active.count == 0 {
                        active.first_id = entry.tweet.id;
                    }
                    active.last_id = entry.tweet.id;
                    active.count += 1;
                    verified += line.len();
                }
                Err(reason) => {
                    let msg = format!(
                        "{}: truncating {} bytes after record {} ({reason})",
                        path.display(),
                        bytes.len() - verified,
                        active.count
                    );
                    tracing::warn!("{msg}");
                    warnings.push(msg);
                    break;
                }
            }
        }
        if verified < bytes.len() {
            active.file.set_len(verified as u64)?;
            active.file.sync_all()?;
        }
        active.hasher.update(&bytes[..verified]);
        Ok((active, warnings))
    }

    fn seal(&mut self) -> Result<(), StorageError> {
        self.active.file.sync_all()?;
        let digest = hex::encode(std::mem::take(&mut self.active.hasher).finalize());
        self.manifest.segments.push(SegmentInfo {
            segment: self.active.index,
            first_id: self.active.first_id,
            last_id: self.active.last_id,
            count: self.active.count,
            digest,
        });
        let bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST), &bytes)?;
        self.sealed_records += self.active.count;

        let index = self.active.index + 1;
        let path = segment_path(&self.dir, index);
        self.active = ActiveSegment {
            index,
            file: OpenOptions::new().create(true).read(true).append(true).open(path)?,
            count: 0,
            first_id: 0,
            last_id: 0,
            hasher: Sha256::new(),
        };
        Ok(())
    }

    /// Appends one entry and returns its offset. The record reaches the OS
    /// before this returns; segments are fsynced when sealed.
    pub fn append(&mut self, entry: &LogEntry) -> Result<u64, StorageError> {
        let line = encode_line(entry);
        self.active.file.write_all(&line)?;
        self.active.hasher.update(&line);
        if self.active.count == 0 {
            self.active.first_id = entry.tweet.id;
        }
        self.active.last_id = entry.tweet.id;
        self.active.count += 1;
        let offset = self.len() - 1;
        if self.active.count >= self.segment_records {
            self.seal()?;
        }
        Ok(offset)
    }

    pub fn sync(&mut self) -> Result<(), StorageError> {
        self.active.file.sync_data()?;
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.sealed_records + self.active.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Diagnostics produced while opening (tail truncation).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Streams every entry from the start.
    pub fn replay(&self) -> Result<LogReader, StorageError> {
        self.read_from(0)
    }

    /// Streams entries starting at `offset`.
    pub fn read_from(&self, offset: u64) -> Result<LogReader, StorageError> {
        let mut skip = offset;
        let mut segments = Vec::new();
        for info in &self.manifest.segments {
            if skip >= info.count {
                skip -= info.count;
                continue;
            }
            segments.push((segment_path(&self.dir, info.segment), info.count));
        }
        segments.push((segment_path(&self.dir, self.active.index), self.active.count));
        Ok(LogReader { segments: segments.into_iter(), current: None, skip })
    }
}

pub struct LogReader {
    segments: std::vec::IntoIter<(PathBuf, u64)>,
    current: Option<(BufReader<File>, u64, PathBuf)>,
    skip: u64,
}

impl Iterator for LogReader {
    type Item = Result<LogEntry, StorageError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                let (path, count) = self.segments.next()?;
                match File::open(&path) {
                    Ok(f) => self.current = Some((BufReader::new(f), count, path)),
                    Err(e) => return Some(Err(e.into())),
                }
            }
            let (reader, remaining, path) = self.current.as_mut().expect("set above");
            if *remaining == 0 {
                self.current = None;
                continue;
            }
            let mut line = Vec::new();
            match reader.read_until(b'\n', &mut line) {
                Ok(0) => {
                    self.current = None;
                    continue;
                }
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            *remaining -= 1;
            if self.skip > 0 {
                self.skip -= 1;
                continue;
            }
            return Some(decode_line(&line).map_err(|reason| StorageError::Corrupt {
                what: path.display().to_string(),
                reason,
            }));
        }
    }
}
