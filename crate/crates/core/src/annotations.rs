//! Crowdsourced truthy/spam/legitimate flags on memes and users.
//!
//! Flags arrive through the API or as tweets addressed to the bot account.
//! A tagging tweet must mention the bot, carry exactly one label hashtag and
//! exactly one target token:
//!
//! ```text
//! @truthybot #spam meme:hashtag:p2
//! @truthybot #truthy user:@someone
//! ```
//!
//! The log is append-only. Repeating the same (annotator, target, label)
//! within 24 hours appends a repeat line instead of a new record.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::meme::{MemeKey, MemeKind};
use crate::tweet::is_valid_screen_name;

pub const DEFAULT_BOT_HANDLE: &str = "truthybot";

/// Window within which identical flags collapse into one record.
pub const REPEAT_WINDOW_HOURS: i64 = 24;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("invalid label `{0}` (expected truthy, spam or legitimate)")]
    InvalidLabel(String),
    #[error("malformed target `{0}`")]
    MalformedTarget(String),
    #[error("annotation log: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotation log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Truthy,
    Spam,
    Legitimate,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Truthy, Label::Spam, Label::Legitimate];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Truthy => "truthy",
            Label::Spam => "spam",
            Label::Legitimate => "legitimate",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "truthy" => Ok(Label::Truthy),
            "spam" => Ok(Label::Spam),
            "legitimate" => Ok(Label::Legitimate),
            _ => Err(AnnotationError::InvalidLabel(s.to_string())),
        }
    }
}

/// What a flag is about. Written as `meme:<kind>:<value>`, `user:<id>` or
/// `user:@<handle>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Meme(MemeKey),
    UserId(u64),
    UserHandle(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Meme(k) => write!(f, "meme:{}:{}", k.kind, k.value),
            Target::UserId(id) => write!(f, "user:{id}"),
            Target::UserHandle(h) => write!(f, "user:@{h}"),
        }
    }
}

impl FromStr for Target {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || AnnotationError::MalformedTarget(s.to_string());
        if let Some(rest) = s.strip_prefix("meme:") {
            let (kind, value) = rest.split_once(':').ok_or_else(malformed)?;
            let kind: MemeKind = kind.parse().map_err(|_| malformed())?;
            return MemeKey::new(kind, value).map(Target::Meme).map_err(|_| malformed());
        }
        if let Some(rest) = s.strip_prefix("user:") {
            if let Some(handle) = rest.strip_prefix('@') {
                return if is_valid_screen_name(handle) {
                    Ok(Target::UserHandle(handle.to_ascii_lowercase()))
                } else {
                    Err(malformed())
                };
            }
            return rest.parse().map(Target::UserId).map_err(|_| malformed());
        }
        Err(malformed())
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Api,
    TweetSyntax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub annotator: String,
    pub target: Target,
    pub label: Label,
    pub source: Source,
    #[serde(with = "crate::tweet::rfc3339")]
    pub created_at: DateTime<Utc>,
    /// How many identical flags this record stands for.
    pub repeat: u32,
    /// The target was not a known meme or user when the flag was written.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unresolved: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tweet_id: Option<u64>,
}

/// A flag waiting to be stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewAnnotation {
    pub annotator: String,
    pub target: Target,
    pub label: Label,
    pub source: Source,
    pub created_at: DateTime<Utc>,
    pub tweet_id: Option<u64>,
}

/// Label and target recovered from a tagging tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationTag {
    pub label: Label,
    pub target: Target,
}

impl AnnotationTag {
    /// Renders the tag as a tweet the parser accepts.
    pub fn to_tweet_text(&self, bot_handle: &str) -> String {
        format!("@{bot_handle} #{} {}", self.label, self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagParse {
    Matched(AnnotationTag),
    Ambiguous,
    NoMatch,
}

fn is_bot_mention(token: &str, bot_handle: &str) -> bool {
    let token = token.trim_end_matches([':', ',']);
    token
        .strip_prefix('@')
        .is_some_and(|h| h.eq_ignore_ascii_case(bot_handle))
}

fn label_token(token: &str) -> Option<Label> {
    let tag = token.strip_prefix('#')?;
    Label::ALL.into_iter().find(|l| tag.eq_ignore_ascii_case(l.as_str()))
}

fn target_token(token: &str) -> Option<Target> {
    match token.parse::<Target>() {
        Ok(t @ (Target::Meme(_) | Target::UserHandle(_))) => Some(t),
        _ => None,
    }
}

/// Full verdict of the tagging grammar for one text.
pub fn classify_annotation_tweet(text: &str, bot_handle: &str) -> TagParse {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if !tokens.iter().any(|t| is_bot_mention(t, bot_handle)) {
        return TagParse::NoMatch;
    }
    let labels: Vec<Label> = tokens.iter().filter_map(|t| label_token(t)).collect();
    let mut targets: Vec<Target> = tokens.iter().filter_map(|t| target_token(t)).collect();
    if labels.len() > 1 || targets.len() > 1 {
        return TagParse::Ambiguous;
    }
    match (labels.first(), targets.pop()) {
        (Some(&label), Some(target)) => TagParse::Matched(AnnotationTag { label, target }),
        _ => TagParse::NoMatch,
    }
}

/// Parses a tagging tweet; `None` for non-matching and ambiguous texts.
pub fn parse_annotation_tweet(text: &str, bot_handle: &str) -> Option<AnnotationTag> {
    match classify_annotation_tweet(text, bot_handle) {
        TagParse::Matched(tag) => Some(tag),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub truthy: u64,
    pub spam: u64,
    pub legitimate: u64,
}

impl LabelCounts {
    fn add(&mut self, label: Label, n: u64) {
        match label {
            Label::Truthy => self.truthy += n,
            Label::Spam => self.spam += n,
            Label::Legitimate => self.legitimate += n,
        }
    }

    pub fn total(&self) -> u64 {
        self.truthy + self.spam + self.legitimate
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Record(AnnotationRecord),
    Repeat {
        of: u64,
        #[serde(with = "crate::tweet::rfc3339")]
        created_at: DateTime<Utc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tweet_id: Option<u64>,
    },
}

/// Outcome of storing one flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stored {
    pub id: u64,
    /// Merged into an earlier identical flag.
    pub repeated: bool,
}

#[derive(Debug, Default)]
pub struct AnnotationStore {
    records: Vec<AnnotationRecord>,
    latest: HashMap<(String, Target, Label), usize>,
    summaries: BTreeMap<Target, LabelCounts>,
    seen_tweets: HashSet<u64>,
    log: Option<File>,
    log_lines: u64,
    ambiguous: u64,
}

impl AnnotationStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) the log at `path` and folds its lines.
    pub fn open(path: &Path) -> Result<Self, AnnotationError> {
        let mut store = Self::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: LogLine = serde_json::from_str(&line)
                    .map_err(|e| AnnotationError::CorruptLog { line: i + 1, reason: e.to_string() })?;
                store.fold(parsed).map_err(|reason| AnnotationError::CorruptLog { line: i + 1, reason })?;
            }
        }
        store.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(store)
    }

    fn fold(&mut self, line: LogLine) -> Result<(), String> {
        self.log_lines += 1;
        match line {
            LogLine::Record(rec) => {
                if rec.id != self.records.len() as u64 + 1 {
                    return Err(format!("record id {} out of sequence", rec.id));
                }
                if let Some(t) = rec.tweet_id {
                    self.seen_tweets.insert(t);
                }
                self.summaries.entry(rec.target.clone()).or_default().add(rec.label, 1);
                self.latest
                    .insert((rec.annotator.clone(), rec.target.clone(), rec.label), self.records.len());
                self.records.push(AnnotationRecord { repeat: 1, ..rec });
            }
            LogLine::Repeat { of, tweet_id, .. } => {
                let rec = self
                    .records
                    .get_mut((of as usize).wrapping_sub(1))
                    .ok_or_else(|| format!("repeat of unknown record {of}"))?;
                rec.repeat += 1;
                if let Some(t) = tweet_id {
                    self.seen_tweets.insert(t);
                }
                self.summaries.entry(rec.target.clone()).or_default().add(rec.label, 1);
            }
        }
        Ok(())
    }

    fn write(&mut self, line: &LogLine) -> Result<(), AnnotationError> {
        if let Some(log) = &mut self.log {
            let mut buf = serde_json::to_vec(line).expect("log line serializes");
            buf.push(b'\n');
            log.write_all(&buf)?;
        }
        Ok(())
    }

    /// True if a flag from this tweet was already stored.
    pub fn has_tweet(&self, tweet_id: u64) -> bool {
        self.seen_tweets.contains(&tweet_id)
    }

    /// Appends a flag. `resolved` says whether the target is currently known.
    pub fn record(&mut self, new: NewAnnotation, resolved: bool) -> Result<Stored, AnnotationError> {
        let key = (new.annotator.clone(), new.target.clone(), new.label);
        if let Some(&idx) = self.latest.get(&key) {
            let base = &self.records[idx];
            if (new.created_at - base.created_at).abs() < Duration::hours(REPEAT_WINDOW_HOURS) {
                let id = base.id;
                let line = LogLine::Repeat { of: id, created_at: new.created_at, tweet_id: new.tweet_id };
                self.write(&line)?;
                self.fold(line).expect("repeat of a known record");
                return Ok(Stored { id, repeated: true });
            }
        }
        let rec = AnnotationRecord {
            id: self.records.len() as u64 + 1,
            annotator: new.annotator,
            target: new.target,
            label: new.label,
            source: new.source,
            created_at: new.created_at,
            repeat: 1,
            unresolved: !resolved,
            tweet_id: new.tweet_id,
        };
        let id = rec.id;
        let line = LogLine::Record(rec);
        self.write(&line)?;
        self.fold(line).expect("record in sequence");
        Ok(Stored { id, repeated: false })
    }

    pub fn get(&self, id: u64) -> Option<&AnnotationRecord> {
        self.records.get((id as usize).checked_sub(1)?)
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    /// Per-label totals with repeats expanded; zero-filled for unknown targets.
    pub fn summary(&self, target: &Target) -> LabelCounts {
        self.summaries.get(target).copied().unwrap_or_default()
    }

    /// Number of lines in the append-only log.
    pub fn log_len(&self) -> u64 {
        self.log_lines
    }

    pub fn note_ambiguous(&mut self) {
        self.ambiguous += 1;
    }

    pub fn ambiguous_count(&self) -> u64 {
        self.ambiguous
    }

    pub fn flush(&mut self) -> Result<(), AnnotationError> {
        if let Some(log) = &mut self.log {
            log.sync_data()?;
        }
        Ok(())
    }
}
