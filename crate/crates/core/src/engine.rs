//! In-memory analytics state fed by routed tweets.
//!
//! Tweets are applied in two steps: [`Engine::route`] computes memes and
//! themes without touching state, and [`Engine::commit`] applies a routed
//! tweet to every meme network, the co-occurrence index and the user table.
//! The pipeline writes the event log between the two.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{
    rank_cooccurrences, sentiment_score, time_series, AnalyticsError, CooccurrenceEntry, CooccurrenceIndex,
    Definitions, Interval, LabelSet, Lexicon, MemeStats, TimeSeries,
};
use crate::annotations::{
    classify_annotation_tweet, AnnotationError, AnnotationRecord, AnnotationStore, Label, LabelCounts, NewAnnotation,
    Source, Stored, TagParse, Target, DEFAULT_BOT_HANDLE,
};
use crate::graph::{DiffusionEvent, DiffusionNetwork, NetworkSnapshot, UserRef};
use crate::meme::{analyze, MemeKey, TweetAnalysis};
use crate::storage::{export_network, ExportFormat, SpillStore, StorageError};
use crate::theme::{route, Theme};
use crate::tweet::Tweet;

pub const DEFAULT_RECENT_LIMIT: usize = 200;
pub const DEFAULT_COOCCURRENCE_K: usize = 10;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("unknown theme `{0}`")]
    UnknownTheme(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub themes: Vec<Theme>,
    pub lexicon: Option<Lexicon>,
    pub labels: LabelSet,
    pub definitions: Definitions,
    pub bot_handle: String,
    /// Upper bound on recent tweets returned for a meme.
    pub recent_limit: usize,
    /// Networks kept in memory before the least recently updated are spilled.
    pub max_resident_memes: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            themes: Vec::new(),
            lexicon: None,
            labels: LabelSet::default(),
            definitions: Definitions::default(),
            bot_handle: DEFAULT_BOT_HANDLE.to_string(),
            recent_limit: DEFAULT_RECENT_LIMIT,
            max_resident_memes: None,
        }
    }
}

impl EngineConfig {
    pub fn with_themes(themes: Vec<Theme>) -> Self {
        Self { themes, ..Self::default() }
    }
}

/// A tweet with its memes and matching themes, not yet applied.
#[derive(Debug, Clone)]
pub struct RoutedTweet {
    pub tweet: Tweet,
    pub analysis: TweetAnalysis,
    pub themes: Vec<String>,
}

impl RoutedTweet {
    pub fn is_routed(&self) -> bool {
        !self.themes.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserActivity {
    pub screen_name: String,
    /// Routed tweets authored.
    pub activity: u64,
    pub sentiment_sum: f64,
    pub sentiment_n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub user_id: u64,
    pub screen_name: String,
    pub activity: u64,
    pub sentiment_mean: Option<f64>,
    pub partisanship: Option<f64>,
    pub language: Option<String>,
    pub annotations: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeSummary {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub meme_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemeSummary {
    pub meme_key: MemeKey,
    pub n_tweets: u64,
    pub n_users: u64,
    #[serde(with = "crate::tweet::rfc3339")]
    pub last_seen: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemeSort {
    Tweets,
    Users,
    Recency,
}

impl FromStr for MemeSort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tweets" => Ok(MemeSort::Tweets),
            "users" => Ok(MemeSort::Users),
            "recency" => Ok(MemeSort::Recency),
            other => Err(format!("unknown sort key `{other}` (expected tweets, users or recency)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemeDetail {
    #[serde(flatten)]
    pub stats: MemeStats,
    pub themes: Vec<String>,
    pub annotations: LabelCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

/// Everything downloadable about one meme except the network itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedBundle {
    pub stats: MemeStats,
    pub timeseries: TimeSeries,
    pub cooccurrence: Vec<CooccurrenceEntry>,
    pub recent_tweets: Vec<Tweet>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineCounters {
    pub routed: u64,
    pub unrouted: u64,
    pub annotation_tweets: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MemeEntry {
    key: MemeKey,
    tweets: Vec<u32>,
    themes: BTreeSet<String>,
    n_users: u64,
    #[serde(with = "crate::tweet::rfc3339")]
    last_seen: DateTime<Utc>,
    #[serde(skip)]
    network: Option<Arc<DiffusionNetwork>>,
    #[serde(skip)]
    touched: u64,
}

/// Serializable engine contents; everything else is rebuilt from it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EngineState {
    tweets: Vec<Arc<Tweet>>,
    memes: Vec<MemeEntry>,
    networks: Vec<Arc<DiffusionNetwork>>,
    cooccurrence: CooccurrenceIndex,
    users: BTreeMap<u64, UserActivity>,
    directory: BTreeMap<String, u64>,
    counters: EngineCounters,
}

impl EngineState {
    pub fn tweet_count(&self) -> usize {
        self.tweets.len()
    }
}

pub struct Engine {
    config: EngineConfig,
    tweets: Vec<Arc<Tweet>>,
    memes: Vec<MemeEntry>,
    meme_ids: HashMap<MemeKey, u32>,
    theme_memes: BTreeMap<String, BTreeSet<u32>>,
    cooccurrence: CooccurrenceIndex,
    users: BTreeMap<u64, UserActivity>,
    directory: BTreeMap<String, u64>,
    annotations: AnnotationStore,
    spill: Option<SpillStore>,
    lru: BTreeMap<u64, u32>,
    resident: usize,
    clock: u64,
    counters: EngineCounters,
}

/// Stable id for a handle never seen as an author. The top bit keeps it
/// apart from platform ids.
pub fn synthetic_user_id(handle: &str) -> u64 {
    let digest = Sha256::digest(handle.to_lowercase().as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes) | (1 << 63)
}

impl Engine {
    pub fn new(mut config: EngineConfig) -> Self {
        config.bot_handle = config.bot_handle.trim_start_matches('@').to_lowercase();
        Self {
            config,
            tweets: Vec::new(),
            memes: Vec::new(),
            meme_ids: HashMap::new(),
            theme_memes: BTreeMap::new(),
            cooccurrence: CooccurrenceIndex::default(),
            users: BTreeMap::new(),
            directory: BTreeMap::new(),
            annotations: AnnotationStore::in_memory(),
            spill: None,
            lru: BTreeMap::new(),
            resident: 0,
            clock: 0,
            counters: EngineCounters::default(),
        }
    }

    pub fn with_annotations(mut self, store: AnnotationStore) -> Self {
        self.annotations = store;
        self
    }

    /// Enables spilling under `dir` when a resident cap is configured.
    pub fn with_spill_dir(mut self, dir: &Path) -> Result<Self, StorageError> {
        self.spill = Some(SpillStore::open(dir)?);
        Ok(self)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn themes(&self) -> &[Theme] {
        &self.config.themes
    }

    pub fn counters(&self) -> EngineCounters {
        self.counters
    }

    pub fn tweet_count(&self) -> usize {
        self.tweets.len()
    }

    /// Stored (routed) tweets in application order.
    pub fn tweets(&self) -> impl Iterator<Item = &Tweet> + '_ {
        self.tweets.iter().map(|t| t.as_ref())
    }

    pub fn meme_count(&self) -> usize {
        self.memes.len()
    }

    pub fn meme_keys(&self) -> impl Iterator<Item = &MemeKey> + '_ {
        self.memes.iter().map(|m| &m.key)
    }

    pub fn contains_meme(&self, key: &MemeKey) -> bool {
        self.meme_ids.contains_key(key)
    }

    pub fn resident_networks(&self) -> usize {
        self.resident
    }

    pub fn annotations(&self) -> &AnnotationStore {
        &self.annotations
    }

    pub fn user_by_handle(&self, handle: &str) -> Option<u64> {
        self.directory.get(&handle.to_lowercase()).copied()
    }

    // ---- writes -------------------------------------------------------

    pub fn route(&self, tweet: Tweet) -> RoutedTweet {
        let analysis = analyze(&tweet);
        let themes = route(&analysis, &self.config.themes);
        RoutedTweet { tweet, analysis, themes }
    }

    /// Rebuilds a routed tweet from a log entry, trusting the stored themes.
    pub fn reroute(&self, tweet: Tweet, themes: Vec<String>) -> RoutedTweet {
        let analysis = analyze(&tweet);
        RoutedTweet { tweet, analysis, themes }
    }

    fn note_user(&mut self, id: u64, screen_name: &str) {
        self.users.entry(id).or_insert_with(|| UserActivity {
            screen_name: screen_name.to_string(),
            ..Default::default()
        });
    }

    fn resolve_handle(&self, handle: &str) -> u64 {
        self.directory.get(handle).copied().unwrap_or_else(|| synthetic_user_id(handle))
    }

    /// Applies a routed tweet. Unrouted tweets only bump a counter.
    pub fn commit(&mut self, routed: RoutedTweet) -> Result<(), EngineError> {
        let RoutedTweet { tweet, analysis, themes } = routed;
        if themes.is_empty() {
            self.counters.unrouted += 1;
            return Ok(());
        }
        self.counters.routed += 1;

        self.directory.insert(analysis.author.clone(), tweet.user_id);
        let retweet_of = match (tweet.retweet_of_user_id, &tweet.retweet_of_screen_name) {
            (Some(id), Some(name)) => {
                self.directory.insert(name.to_lowercase(), id);
                Some(UserRef::new(id, name.clone()))
            }
            _ => None,
        };
        let mentions: Vec<UserRef> = analysis
            .mentions
            .iter()
            .map(|h| UserRef::new(self.resolve_handle(h), h.clone()))
            .collect();

        let author = self.users.entry(tweet.user_id).or_default();
        author.activity += 1;
        if author.screen_name != tweet.screen_name {
            author.screen_name.clone_from(&tweet.screen_name);
        }
        if let Some(lexicon) = &self.config.lexicon {
            if let Some(score) = sentiment_score(&tweet.text, lexicon) {
                author.sentiment_sum += score;
                author.sentiment_n += 1;
            }
        }
        if let Some(origin) = &retweet_of {
            self.note_user(origin.id, &origin.screen_name);
        }
        for m in &mentions {
            self.note_user(m.id, &m.screen_name);
        }

        let event = DiffusionEvent {
            created_at: tweet.created_at,
            author: UserRef::new(tweet.user_id, tweet.screen_name.clone()),
            retweet_of,
            mentions,
        };
        let idx = self.tweets.len() as u32;
        self.tweets.push(Arc::new(tweet));

        let mut ids = Vec::with_capacity(analysis.memes.len());
        for key in analysis.memes {
            let id = self.intern(key);
            ids.push(id);
            self.apply_to_meme(id, idx, &event, &themes)?;
        }
        self.cooccurrence.record(&ids);
        self.enforce_cap()?;
        Ok(())
    }

    fn intern(&mut self, key: MemeKey) -> u32 {
        if let Some(&id) = self.meme_ids.get(&key) {
            return id;
        }
        let id = self.memes.len() as u32;
        self.memes.push(MemeEntry {
            network: Some(Arc::new(DiffusionNetwork::new(key.clone()))),
            key: key.clone(),
            tweets: Vec::new(),
            themes: BTreeSet::new(),
            n_users: 0,
            last_seen: DateTime::<Utc>::MIN_UTC,
            touched: 0,
        });
        self.meme_ids.insert(key, id);
        self.resident += 1;
        id
    }

    fn apply_to_meme(&mut self, id: u32, idx: u32, event: &DiffusionEvent, themes: &[String]) -> Result<(), EngineError> {
        self.clock += 1;
        let tracking = self.config.max_resident_memes.is_some() && self.spill.is_some();
        let entry = &mut self.memes[id as usize];
        if entry.network.is_none() {
            let spill = self.spill.as_ref().expect("spilled network without a spill store");
            entry.network = Some(Arc::new(spill.read(id)?));
            self.resident += 1;
        }
        if tracking {
            self.lru.remove(&entry.touched);
            self.lru.insert(self.clock, id);
        }
        entry.touched = self.clock;
        let network = Arc::make_mut(entry.network.as_mut().expect("resident"));
        network.apply(event);
        entry.n_users = network.node_count() as u64;
        entry.last_seen = entry.last_seen.max(event.created_at);
        entry.tweets.push(idx);
        for theme in themes {
            if !entry.themes.contains(theme) {
                entry.themes.insert(theme.clone());
                self.theme_memes.entry(theme.clone()).or_default().insert(id);
            }
        }
        Ok(())
    }

    fn enforce_cap(&mut self) -> Result<(), EngineError> {
        let (Some(cap), Some(spill)) = (self.config.max_resident_memes, &self.spill) else {
            return Ok(());
        };
        while self.resident > cap.max(1) {
            let Some((_, id)) = self.lru.pop_first() else { break };
            let entry = &mut self.memes[id as usize];
            if let Some(network) = entry.network.take() {
                spill.write(id, &network)?;
                self.resident -= 1;
            }
        }
        Ok(())
    }

    /// Records a tagging tweet, if `tweet` is one. Each tweet id is stored at
    /// most once across restarts.
    pub fn observe_annotation(&mut self, tweet: &Tweet) -> Result<Option<Stored>, EngineError> {
        if self.annotations.has_tweet(tweet.id) {
            return Ok(None);
        }
        match classify_annotation_tweet(&tweet.text, &self.config.bot_handle) {
            TagParse::NoMatch => Ok(None),
            TagParse::Ambiguous => {
                self.annotations.note_ambiguous();
                Ok(None)
            }
            TagParse::Matched(tag) => {
                self.counters.annotation_tweets += 1;
                let (target, resolved) = self.resolve_target(tag.target);
                let stored = self.annotations.record(
                    NewAnnotation {
                        annotator: tweet.user_id.to_string(),
                        target,
                        label: tag.label,
                        source: Source::TweetSyntax,
                        created_at: tweet.created_at,
                        tweet_id: Some(tweet.id),
                    },
                    resolved,
                )?;
                Ok(Some(stored))
            }
        }
    }

    /// Canonical form of a target and whether it names something tracked.
    /// Known handles are rewritten to user ids.
    pub fn resolve_target(&self, target: Target) -> (Target, bool) {
        match target {
            Target::Meme(key) => {
                let known = self.meme_ids.contains_key(&key);
                (Target::Meme(key), known)
            }
            Target::UserId(id) => (Target::UserId(id), self.users.contains_key(&id)),
            Target::UserHandle(handle) => match self.directory.get(&handle) {
                Some(&id) => (Target::UserId(id), true),
                None => (Target::UserHandle(handle), false),
            },
        }
    }

    /// Stores an API flag and returns the resulting record.
    pub fn annotate(
        &mut self,
        annotator: &str,
        target: Target,
        label: Label,
        created_at: DateTime<Utc>,
    ) -> Result<AnnotationRecord, EngineError> {
        let (target, resolved) = self.resolve_target(target);
        let stored = self.annotations.record(
            NewAnnotation {
                annotator: annotator.to_string(),
                target,
                label,
                source: Source::Api,
                created_at,
                tweet_id: None,
            },
            resolved,
        )?;
        Ok(self.annotations.get(stored.id).cloned().expect("just stored"))
    }

    pub fn flush_annotations(&mut self) -> Result<(), EngineError> {
        self.annotations.flush()?;
        Ok(())
    }

    // ---- reads --------------------------------------------------------

    fn entry(&self, key: &MemeKey) -> Result<(u32, &MemeEntry), EngineError> {
        let id = *self.meme_ids.get(key).ok_or_else(|| AnalyticsError::UnknownMeme(key.clone()))?;
        Ok((id, &self.memes[id as usize]))
    }

    fn network_of(&self, id: u32) -> Result<Arc<DiffusionNetwork>, EngineError> {
        match &self.memes[id as usize].network {
            Some(n) => Ok(Arc::clone(n)),
            None => {
                let spill = self.spill.as_ref().expect("spilled network without a spill store");
                Ok(Arc::new(spill.read(id)?))
            }
        }
    }

    /// Immutable view of a meme network.
    pub fn network(&self, key: &MemeKey) -> Result<NetworkSnapshot, EngineError> {
        let (id, _) = self.entry(key)?;
        Ok(NetworkSnapshot::from_shared(self.network_of(id)?))
    }

    pub fn stats(&self, key: &MemeKey) -> Result<MemeStats, EngineError> {
        Ok(MemeStats::of(&*self.network(key)?))
    }

    pub fn meme_detail(&self, key: &MemeKey) -> Result<MemeDetail, EngineError> {
        let (_, entry) = self.entry(key)?;
        Ok(MemeDetail {
            stats: self.stats(key)?,
            themes: entry.themes.iter().cloned().collect(),
            annotations: self.annotations.summary(&Target::Meme(key.clone())),
            definition: self.config.definitions.get(key).map(str::to_string),
        })
    }

    pub fn time_series(&self, key: &MemeKey, interval: Interval) -> Result<TimeSeries, EngineError> {
        let (_, entry) = self.entry(key)?;
        let points = entry.tweets.iter().map(|&i| {
            let t = &self.tweets[i as usize];
            (t.created_at, t.user_id)
        });
        Ok(time_series(points, interval))
    }

    /// Joint tweet count of two memes; zero when either is unknown.
    pub fn joint_count(&self, a: &MemeKey, b: &MemeKey) -> u64 {
        match (self.meme_ids.get(a), self.meme_ids.get(b)) {
            (Some(&a), Some(&b)) => self.cooccurrence.joint(a, b),
            _ => 0,
        }
    }

    /// Tweets stored for a meme.
    pub fn meme_tweet_count(&self, key: &MemeKey) -> Result<u64, EngineError> {
        Ok(self.entry(key)?.1.tweets.len() as u64)
    }

    pub fn cooccurrence_top(&self, key: &MemeKey, k: usize) -> Result<Vec<CooccurrenceEntry>, EngineError> {
        let (id, entry) = self.entry(key)?;
        let own = entry.tweets.len() as u64;
        let entries = self
            .cooccurrence
            .partners(id)
            .map(|(b, joint)| {
                let other = &self.memes[b as usize];
                CooccurrenceEntry::new(key.clone(), other.key.clone(), joint, own, other.tweets.len() as u64)
            })
            .collect();
        Ok(rank_cooccurrences(entries, k))
    }

    /// Most recent tweets first, capped at the configured limit.
    pub fn recent_tweets(&self, key: &MemeKey, limit: usize) -> Result<Vec<Tweet>, EngineError> {
        let (_, entry) = self.entry(key)?;
        let limit = limit.min(self.config.recent_limit);
        Ok(entry.tweets.iter().rev().take(limit).map(|&i| (*self.tweets[i as usize]).clone()).collect())
    }

    pub fn user_stats(&self, user_id: u64) -> Result<UserStats, EngineError> {
        let user = self.users.get(&user_id).ok_or(AnalyticsError::UnknownUser(user_id))?;
        let labels = self.config.labels.get(user_id);
        let mut annotations = self.annotations.summary(&Target::UserId(user_id));
        let by_handle = self.annotations.summary(&Target::UserHandle(user.screen_name.to_lowercase()));
        annotations.truthy += by_handle.truthy;
        annotations.spam += by_handle.spam;
        annotations.legitimate += by_handle.legitimate;
        Ok(UserStats {
            user_id,
            screen_name: user.screen_name.clone(),
            activity: user.activity,
            sentiment_mean: (user.sentiment_n > 0).then(|| user.sentiment_sum / user.sentiment_n as f64),
            partisanship: labels.and_then(|l| l.partisanship),
            language: labels.and_then(|l| l.language.clone()),
            annotations,
        })
    }

    pub fn user_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.users.keys().copied()
    }

    pub fn themes_summary(&self) -> Vec<ThemeSummary> {
        self.config
            .themes
            .iter()
            .map(|t| ThemeSummary {
                name: t.name.clone(),
                description: t.description.clone(),
                meme_count: self.theme_memes.get(&t.name).map_or(0, |m| m.len() as u64),
            })
            .collect()
    }

    pub fn theme_memes(&self, theme: &str, sort: MemeSort, limit: usize) -> Result<Vec<MemeSummary>, EngineError> {
        if !self.config.themes.iter().any(|t| t.name == theme) {
            return Err(EngineError::UnknownTheme(theme.to_string()));
        }
        let mut out: Vec<MemeSummary> = self
            .theme_memes
            .get(theme)
            .into_iter()
            .flatten()
            .map(|&id| {
                let e = &self.memes[id as usize];
                MemeSummary {
                    meme_key: e.key.clone(),
                    n_tweets: e.tweets.len() as u64,
                    n_users: e.n_users,
                    last_seen: e.last_seen,
                }
            })
            .collect();
        out.sort_by(|a, b| {
            let primary = match sort {
                MemeSort::Tweets => b.n_tweets.cmp(&a.n_tweets),
                MemeSort::Users => b.n_users.cmp(&a.n_users),
                MemeSort::Recency => b.last_seen.cmp(&a.last_seen),
            };
            primary.then_with(|| a.meme_key.cmp(&b.meme_key))
        });
        out.truncate(limit);
        Ok(out)
    }

    pub fn export_network(&self, key: &MemeKey, format: ExportFormat) -> Result<Vec<u8>, EngineError> {
        Ok(export_network(&*self.network(key)?, format, &self.config.labels))
    }

    pub fn export_derived(&self, key: &MemeKey) -> Result<DerivedBundle, EngineError> {
        Ok(DerivedBundle {
            stats: self.stats(key)?,
            timeseries: self.time_series(key, Interval::Hour)?,
            cooccurrence: self.cooccurrence_top(key, DEFAULT_COOCCURRENCE_K)?,
            recent_tweets: self.recent_tweets(key, self.config.recent_limit)?,
        })
    }

    // ---- state --------------------------------------------------------

    /// A consistent copy of all derived state. Networks are shared, not
    /// copied; spilled ones are read back.
    pub fn state(&self) -> Result<EngineState, EngineError> {
        let networks = (0..self.memes.len() as u32).map(|id| self.network_of(id)).collect::<Result<_, _>>()?;
        Ok(EngineState {
            tweets: self.tweets.clone(),
            memes: self.memes.clone(),
            networks,
            cooccurrence: self.cooccurrence.clone(),
            users: self.users.clone(),
            directory: self.directory.clone(),
            counters: self.counters,
        })
    }

    /// Replaces all derived state. Annotations and configuration are kept.
    pub fn restore(&mut self, state: EngineState) -> Result<(), EngineError> {
        let EngineState { tweets, mut memes, networks, cooccurrence, users, directory, counters } = state;
        if networks.len() != memes.len() {
            return Err(StorageError::Corrupt {
                what: "snapshot".into(),
                reason: format!("{} memes but {} networks", memes.len(), networks.len()),
            }
            .into());
        }
        self.meme_ids.clear();
        self.theme_memes.clear();
        self.lru.clear();
        self.clock = 0;
        for (id, (entry, network)) in memes.iter_mut().zip(networks).enumerate() {
            if network.meme != entry.key {
                return Err(StorageError::Corrupt {
                    what: "snapshot".into(),
                    reason: format!("network {} filed under {}", network.meme, entry.key),
                }
                .into());
            }
            entry.network = Some(network);
            entry.touched = 0;
            self.meme_ids.insert(entry.key.clone(), id as u32);
            for theme in &entry.themes {
                self.theme_memes.entry(theme.clone()).or_default().insert(id as u32);
            }
        }
        self.resident = memes.len();
        if self.config.max_resident_memes.is_some() && self.spill.is_some() {
            let mut order: Vec<(DateTime<Utc>, u32)> =
                memes.iter().enumerate().map(|(i, e)| (e.last_seen, i as u32)).collect();
            order.sort();
            for (_, id) in order {
                self.clock += 1;
                memes[id as usize].touched = self.clock;
                self.lru.insert(self.clock, id);
            }
        }
        self.tweets = tweets;
        self.memes = memes;
        self.cooccurrence = cooccurrence;
        self.users = users;
        self.directory = directory;
        self.counters = counters;
        self.enforce_cap()
    }

    /// Hex SHA-256 over a canonical rendering of tweets, memes, networks,
    /// co-occurrences and users. Independent of meme interning order,
    /// residency and counters.
    pub fn state_digest(&self) -> Result<String, EngineError> {
        #[derive(Serialize)]
        struct NetworkView<'a> {
            nodes: Vec<(&'a u64, &'a crate::graph::UserNode)>,
            edges: Vec<(&'a crate::graph::EdgeKey, &'a crate::graph::EdgeData)>,
            tweet_count: u64,
            #[serde(with = "crate::tweet::rfc3339::option")]
            first_seen: Option<DateTime<Utc>>,
            #[serde(with = "crate::tweet::rfc3339::option")]
            last_seen: Option<DateTime<Utc>>,
            dropped_self_retweets: u64,
            dropped_self_mentions: u64,
            collapsed_edges: usize,
            lcc: usize,
        }

        fn emit<T: Serialize + ?Sized>(hasher: &mut BufWriter<Sha256>, value: &T) {
            serde_json::to_writer(&mut *hasher, value).expect("state serializes");
            hasher.write_all(b"\n").expect("hashing never fails");
        }

        let mut hasher = BufWriter::with_capacity(1 << 16, Sha256::new());

        let ids: Vec<u64> = self.tweets.iter().map(|t| t.id).collect();
        emit(&mut hasher, &ids);

        let mut order: Vec<u32> = (0..self.memes.len() as u32).collect();
        order.sort_by(|&a, &b| self.memes[a as usize].key.cmp(&self.memes[b as usize].key));
        for &id in &order {
            let entry = &self.memes[id as usize];
            let net = self.network_of(id)?;
            let tweet_ids: Vec<u64> = entry.tweets.iter().map(|&i| self.tweets[i as usize].id).collect();
            emit(&mut hasher, &(&entry.key, &entry.themes, tweet_ids));
            emit(
                &mut hasher,
                &NetworkView {
                    nodes: net.nodes.iter().collect(),
                    edges: net.edges.iter().collect(),
                    tweet_count: net.tweet_count,
                    first_seen: net.first_seen,
                    last_seen: net.last_seen,
                    dropped_self_retweets: net.dropped_self_retweets,
                    dropped_self_mentions: net.dropped_self_mentions,
                    collapsed_edges: net.collapsed_edge_count(),
                    lcc: net.largest_component(),
                },
            );
        }

        let mut pairs: Vec<(&MemeKey, &MemeKey, u64)> = self
            .cooccurrence
            .pairs()
            .map(|(a, b, n)| {
                let (ka, kb) = (&self.memes[a as usize].key, &self.memes[b as usize].key);
                if ka <= kb { (ka, kb, n) } else { (kb, ka, n) }
            })
            .collect();
        pairs.sort();
        emit(&mut hasher, &pairs);
        emit(&mut hasher, &self.users.iter().collect::<Vec<_>>());
        emit(&mut hasher, &self.directory);
        let hasher = hasher.into_inner().map_err(|e| e.into_error()).expect("hashing never fails");
        Ok(hex::encode(hasher.finalize()))
    }
}
