//! Record parsing, deduplication and the event-time reorder buffer.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::io::BufRead;
use std::time::Duration as StdDuration;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tweet::{parse_record_detailed, ParseError, ParseErrorKind, Tweet};

/// Event-time window within which out-of-order records are reordered.
pub const DEFAULT_REORDER_WINDOW_SECS: i64 = 60;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("source read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay speed must be a finite number >= 0, got {0}")]
    InvalidSpeed(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounters {
    /// Lines offered to the ingestor (blank lines excluded).
    pub records: u64,
    pub emitted: u64,
    pub malformed_syntax: u64,
    pub missing_required_field: u64,
    pub invalid_timestamp: u64,
    pub invalid_field: u64,
    pub late: u64,
    pub duplicates: u64,
    pub truncated: u64,
}

impl IngestCounters {
    pub fn errors(&self) -> u64 {
        self.malformed_syntax + self.missing_required_field + self.invalid_timestamp + self.invalid_field
    }

    fn count_error(&mut self, err: &ParseError) {
        match err.kind() {
            ParseErrorKind::MalformedSyntax => self.malformed_syntax += 1,
            ParseErrorKind::MissingRequiredField => self.missing_required_field += 1,
            ParseErrorKind::InvalidTimestamp => self.invalid_timestamp += 1,
            ParseErrorKind::InvalidField => self.invalid_field += 1,
        }
    }
}

struct Pending {
    tweet: Tweet,
    seq: u64,
}

impl Pending {
    fn key(&self) -> (DateTime<Utc>, u64) {
        (self.tweet.created_at, self.seq)
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Reversed so the std max-heap pops the earliest record first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// Parses records, drops duplicates and late arrivals, and releases tweets in
/// nondecreasing `created_at` order once they fall behind the watermark.
///
/// A record is released when its timestamp is at or before
/// `max_seen - window`. Records older than the last released timestamp can no
/// longer be placed in order; they are counted as late and dropped. Ties are
/// released in arrival order.
pub struct Ingestor {
    window: Duration,
    heap: BinaryHeap<Pending>,
    seen: HashSet<u64>,
    max_seen: Option<DateTime<Utc>>,
    last_emitted: Option<DateTime<Utc>>,
    seq: u64,
    flushing: bool,
    counters: IngestCounters,
    last_error: Option<ParseError>,
}

impl Default for Ingestor {
    fn default() -> Self {
        Self::new(Duration::seconds(DEFAULT_REORDER_WINDOW_SECS))
    }
}

impl Ingestor {
    pub fn new(window: Duration) -> Self {
        Self {
            window,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
            max_seen: None,
            last_emitted: None,
            seq: 0,
            flushing: false,
            counters: IngestCounters::default(),
            last_error: None,
        }
    }

    /// Seeds dedup and ordering state after recovery: `ids` were already
    /// accepted in a previous run and `last` is the latest timestamp emitted.
    pub fn restore(&mut self, ids: impl IntoIterator<Item = u64>, last: Option<DateTime<Utc>>) {
        self.seen.extend(ids);
        if let Some(last) = last {
            self.last_emitted = Some(self.last_emitted.map_or(last, |t| t.max(last)));
            self.max_seen = Some(self.max_seen.map_or(last, |t| t.max(last)));
        }
    }

    pub fn counters(&self) -> &IngestCounters {
        &self.counters
    }

    pub fn last_error(&self) -> Option<&ParseError> {
        self.last_error.as_ref()
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Offers one raw line. Blank lines are ignored; bad records are counted
    /// and skipped. Returns false when the line was not buffered.
    pub fn push_line(&mut self, line: &[u8]) -> bool {
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            return false;
        }
        self.counters.records += 1;
        match parse_record_detailed(line) {
            Ok(parsed) => {
                if parsed.truncated {
                    self.counters.truncated += 1;
                }
                self.push_tweet(parsed.tweet)
            }
            Err(err) => {
                self.counters.count_error(&err);
                self.last_error = Some(err);
                false
            }
        }
    }

    /// Offers an already parsed tweet.
    pub fn push_tweet(&mut self, tweet: Tweet) -> bool {
        if self.seen.contains(&tweet.id) {
            self.counters.duplicates += 1;
            return false;
        }
        if matches!(self.last_emitted, Some(last) if tweet.created_at < last) {
            self.counters.late += 1;
            return false;
        }
        self.seen.insert(tweet.id);
        self.max_seen = Some(self.max_seen.map_or(tweet.created_at, |t| t.max(tweet.created_at)));
        self.heap.push(Pending { tweet, seq: self.seq });
        self.seq += 1;
        true
    }

    /// Pops the next tweet whose position in event time is settled.
    pub fn pop_ready(&mut self) -> Option<Tweet> {
        let top = self.heap.peek()?;
        if !self.flushing {
            let watermark = self.max_seen? - self.window;
            if top.tweet.created_at > watermark {
                return None;
            }
        }
        let Pending { tweet, .. } = self.heap.pop()?;
        self.last_emitted = Some(tweet.created_at);
        self.counters.emitted += 1;
        Some(tweet)
    }

    /// Marks end of input: every buffered tweet becomes ready.
    pub fn finish(&mut self) {
        self.flushing = true;
    }
}

/// Sleeps between emissions to reproduce recorded inter-arrival gaps at
/// `speed`x. A speed of zero never sleeps.
#[derive(Debug, Clone)]
pub struct Pacer {
    speed: f64,
    previous: Option<DateTime<Utc>>,
}

impl Pacer {
    pub fn new(speed: f64) -> Result<Self, IngestError> {
        if !speed.is_finite() || speed < 0.0 {
            return Err(IngestError::InvalidSpeed(speed));
        }
        Ok(Self { speed, previous: None })
    }

    pub fn delay_for(&mut self, ts: DateTime<Utc>) -> StdDuration {
        let delay = match (self.previous, self.speed > 0.0) {
            (Some(prev), true) if ts > prev => {
                let secs = (ts - prev).num_seconds() as f64 / self.speed;
                StdDuration::from_secs_f64(secs)
            }
            _ => StdDuration::ZERO,
        };
        self.previous = Some(ts);
        delay
    }

    pub fn pace(&mut self, ts: DateTime<Utc>) {
        let delay = self.delay_for(ts);
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}

/// Replays a line-delimited source as an ordered stream of tweets.
pub struct Replay<R> {
    source: R,
    ingestor: Ingestor,
    pacer: Pacer,
    buf: Vec<u8>,
    done: bool,
}

/// Replays `source` at `speed` (0 = as fast as possible).
pub fn replay<R: BufRead>(source: R, speed: f64) -> Result<Replay<R>, IngestError> {
    Replay::with_ingestor(source, speed, Ingestor::default())
}

impl<R: BufRead> Replay<R> {
    pub fn with_ingestor(source: R, speed: f64, ingestor: Ingestor) -> Result<Self, IngestError> {
        Ok(Self {
            source,
            ingestor,
            pacer: Pacer::new(speed)?,
            buf: Vec::new(),
            done: false,
        })
    }

    pub fn counters(&self) -> &IngestCounters {
        self.ingestor.counters()
    }

    pub fn into_ingestor(self) -> Ingestor {
        self.ingestor
    }
}

impl<R: BufRead> Iterator for Replay<R> {
    type Item = Result<Tweet, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(tweet) = self.ingestor.pop_ready() {
                self.pacer.pace(tweet.created_at);
                return Some(Ok(tweet));
            }
            if self.done {
                return None;
            }
            self.buf.clear();
            match self.source.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.ingestor.finish();
                    self.done = true;
                }
                Ok(_) => {
                    self.ingestor.push_line(&self.buf);
                }
                Err(e) => {
                    self.done = true;
                    self.ingestor.heap.clear();
                    return Some(Err(IngestError::Io(e)));
                }
            }
        }
    }
}
