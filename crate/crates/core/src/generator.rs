//! Deterministic synthetic tweet corpora.
//!
//! Hashtag and slogan popularity follow Zipf laws, authors are Zipf-active,
//! retweets copy an earlier original as `RT @origin: <text>`, mentions arrive
//! at a Poisson rate, and a fraction of originals carry one keyword of a
//! randomly chosen theme. Vocabulary that would accidentally match a theme
//! keyword is removed, so a tweet is routed exactly when it carries a planted
//! keyword (its own or its origin's).
//!
//! The [`Ledger`] records what was planted, computed from the generator's own
//! choices rather than by re-parsing the text.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::theme::Theme;
use crate::tweet::{format_timestamp, Tweet};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub tweets: u64,
    pub users: u64,
    pub seed: u64,
    pub retweet_prob: f64,
    /// Mean mentions per original tweet.
    pub mention_rate: f64,
    /// Share of original tweets salted with a theme keyword.
    pub salt_fraction: f64,
    pub url_prob: f64,
    pub hashtag_vocab: u64,
    pub start: DateTime<Utc>,
    /// Seconds between consecutive tweets before jitter.
    pub spacing_secs: i64,
    /// Maximum absolute timestamp jitter in seconds.
    pub jitter_secs: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            tweets: 1000,
            users: 100,
            seed: 0,
            retweet_prob: 0.3,
            mention_rate: 0.5,
            salt_fraction: 0.6,
            url_prob: 0.15,
            hashtag_vocab: 400,
            start: DateTime::parse_from_rfc3339("2010-10-01T00:00:00Z").expect("valid").with_timezone(&Utc),
            spacing_secs: 1,
            jitter_secs: 20,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParameter(m.to_string()));
        if self.tweets < 1 {
            return bad("tweets must be at least 1");
        }
        if self.users < 1 {
            return bad("users must be at least 1");
        }
        for (name, p) in [("retweet_prob", self.retweet_prob), ("salt_fraction", self.salt_fraction), ("url_prob", self.url_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.mention_rate >= 0.0 && self.mention_rate.is_finite()) {
            return bad("mention_rate must be finite and non-negative");
        }
        if self.hashtag_vocab < 1 {
            return bad("hashtag_vocab must be at least 1");
        }
        if self.jitter_secs < 0 || self.spacing_secs < 0 {
            return bad("spacing and jitter must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemeCounts {
    /// Tweets in the corpus carrying the meme.
    pub tweets: u64,
    /// Of those, tweets carrying a planted theme keyword.
    pub routed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub seed: u64,
    pub tweets: u64,
    pub users: u64,
    pub retweets: u64,
    /// Tweets carrying a planted keyword.
    pub routed: u64,
    /// Routed tweets per theme.
    pub theme_salting: BTreeMap<String, u64>,
    /// Keyed by `kind:value`.
    pub memes: BTreeMap<String, MemeCounts>,
    /// Routed tweets per meme per minute (`YYYY-MM-DDTHH:MM:00Z`).
    pub per_minute: BTreeMap<String, BTreeMap<String, u64>>,
}

impl Ledger {
    pub fn write_json(&self, out: impl Write) -> Result<(), GenError> {
        serde_json::to_writer(out, self).map_err(|e| GenError::Io(e.into()))
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub tweets: Vec<Tweet>,
    pub ledger: Ledger,
}

impl Corpus {
    /// One JSON record per line, in generation order.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), GenError> {
        for t in &self.tweets {
            out.write_all(t.to_record().as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

const WORDS: &[&str] = &[
    "the", "people", "today", "new", "report", "watch", "live", "now", "city", "change", "support", "call",
    "debate", "plan", "video", "story", "rally", "march", "speech", "crowd", "govern", "vote", "media", "local",
    "tonight", "future", "jobs", "rights", "power", "voice", "truth", "freedom", "justice", "economy", "health",
    "school", "street", "square", "square", "police", "night", "morning", "photos", "update", "breaking", "read",
    "join", "stand", "together", "never", "again", "more", "less", "real", "fake", "story", "money", "taxes",
    "win", "lose", "fight", "hope", "fear", "world", "nation", "state", "leaders", "youth", "workers", "students",
    "reform", "budget", "water", "border", "peace", "war", "army", "aid", "help", "free", "open", "close",
];

const TAG_STEMS: &[&str] = &[
    "news", "tech", "music", "sports", "media", "jobs", "green", "health", "travel", "food", "art", "film",
    "books", "science", "market", "weather", "energy", "data", "games", "style",
];

fn is_free(word: &str, blocked: &BTreeSet<String>) -> bool {
    !blocked.contains(&word.to_lowercase())
}

struct Planted {
    hashtags: Vec<String>,
    mentions: Vec<String>,
    urls: Vec<String>,
    words: Vec<String>,
    themes: BTreeSet<String>,
}

impl Planted {
    fn memes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.extend(self.hashtags.iter().map(|h| format!("hashtag:{}", h.to_lowercase())));
        out.extend(self.mentions.iter().map(|m| format!("mention:{}", m.to_lowercase())));
        out.extend(self.urls.iter().map(|u| format!("url:{u}")));
        let phrase = self.words.iter().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ");
        if phrase.chars().count() >= crate::meme::MIN_PHRASE_CHARS {
            out.insert(format!("phrase:{phrase}"));
        }
        out
    }

    fn text(&self) -> String {
        let mut parts: Vec<String> = self.words.clone();
        parts.extend(self.hashtags.iter().map(|h| format!("#{h}")));
        parts.extend(self.mentions.iter().map(|m| format!("@{m}")));
        parts.extend(self.urls.iter().cloned());
        parts.join(" ")
    }
}

fn random_case(word: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..10) {
        0 => word.to_uppercase(),
        1 => {
            let mut c = word.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        }
        _ => word.to_string(),
    }
}

/// Generates a corpus. Equal configs and themes give identical output.
pub fn generate(config: &GenConfig, themes: &[Theme]) -> Result<Corpus, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut blocked = BTreeSet::new();
    for theme in themes {
        for kw in &theme.keywords {
            let bare = kw.trim_start_matches(['#', '@']);
            blocked.insert(bare.to_string());
            blocked.extend(bare.split_whitespace().map(str::to_string));
        }
    }
    let words: Vec<&str> = WORDS.iter().copied().filter(|w| is_free(w, &blocked)).collect();
    let hashtags: Vec<String> = (0..config.hashtag_vocab)
        .map(|r| {
            let stem = TAG_STEMS[(r as usize) % TAG_STEMS.len()];
            let round = r as usize / TAG_STEMS.len();
            if round == 0 { stem.to_string() } else { format!("{stem}{round}") }
        })
        .filter(|h| is_free(h, &blocked))
        .collect();
    let user_name = |u: u64| format!("user{u}");
    if (1..=config.users).any(|u| blocked.contains(&user_name(u))) {
        return Err(GenError::InvalidParameter("a theme keyword collides with generated screen names".into()));
    }
    if words.len() < 10 {
        return Err(GenError::InvalidParameter("themes block too much of the word vocabulary".into()));
    }
    let slogans: Vec<Vec<&str>> = (0..50)
        .map(|_| {
            let n = rng.random_range(3..=6);
            (0..n).map(|_| *words.choose(&mut rng).expect("nonempty")).collect()
        })
        .collect();

    let tag_zipf = Zipf::new(hashtags.len().max(1) as f64, 1.1).expect("valid zipf");
    let slogan_zipf = Zipf::new(slogans.len() as f64, 1.0).expect("valid zipf");
    let user_zipf = Zipf::new(config.users as f64, 0.8).expect("valid zipf");
    let url_zipf = Zipf::new(200.0, 1.2).expect("valid zipf");
    let mentions_dist = (config.mention_rate > 0.0).then(|| Poisson::new(config.mention_rate).expect("valid rate"));

    let mut ledger = Ledger { seed: config.seed, tweets: config.tweets, users: config.users, ..Default::default() };
    let mut tweets = Vec::with_capacity(config.tweets as usize);
    // Originals available for retweeting: index into `tweets` and planted content.
    let mut originals: Vec<(usize, Planted)> = Vec::new();

    for i in 0..config.tweets {
        let user = user_zipf.sample(&mut rng) as u64;
        let jitter = if config.jitter_secs > 0 { rng.random_range(-config.jitter_secs..=config.jitter_secs) } else { 0 };
        let created_at = config.start + Duration::seconds(i as i64 * config.spacing_secs + jitter);
        let id = i + 1;

        let lookback = originals.len().saturating_sub(1000);
        let retweet = !originals.is_empty() && rng.random_bool(config.retweet_prob);
        let (tweet, planted) = if retweet {
            let pick = rng.random_range(lookback..originals.len());
            let (origin_idx, origin) = &originals[pick];
            let origin_tweet: &Tweet = &tweets[*origin_idx];
            let planted = Planted {
                hashtags: origin.hashtags.clone(),
                mentions: std::iter::once(origin_tweet.screen_name.clone()).chain(origin.mentions.iter().cloned()).collect(),
                urls: origin.urls.clone(),
                words: origin.words.clone(),
                themes: origin.themes.clone(),
            };
            let tweet = Tweet {
                id,
                created_at,
                user_id: user,
                screen_name: user_name(user),
                text: format!("RT @{}: {}", origin_tweet.screen_name, origin_tweet.text),
                retweet_of_user_id: Some(origin_tweet.user_id),
                retweet_of_screen_name: Some(origin_tweet.screen_name.clone()),
                entities: None,
            };
            ledger.retweets += 1;
            (tweet, planted)
        } else {
            let mut planted = Planted {
                hashtags: Vec::new(),
                mentions: Vec::new(),
                urls: Vec::new(),
                words: Vec::new(),
                themes: BTreeSet::new(),
            };
            if rng.random_bool(0.7) {
                let slogan = &slogans[slogan_zipf.sample(&mut rng) as usize - 1];
                planted.words = slogan.iter().map(|w| random_case(w, &mut rng)).collect();
            } else {
                let n = rng.random_range(0..=5);
                planted.words = (0..n).map(|_| random_case(words.choose(&mut rng).expect("nonempty"), &mut rng)).collect();
            }
            if !hashtags.is_empty() {
                let n = rng.random_range(0..=2);
                for _ in 0..n {
                    let tag = &hashtags[tag_zipf.sample(&mut rng) as usize - 1];
                    planted.hashtags.push(random_case(tag, &mut rng));
                }
            }
            let n_mentions = mentions_dist.as_ref().map_or(0, |d| d.sample(&mut rng) as u64).min(4);
            for _ in 0..n_mentions {
                planted.mentions.push(user_name(rng.random_range(1..=config.users)));
            }
            if rng.random_bool(config.url_prob) {
                planted.urls.push(format!("http://news.example/story/{}", url_zipf.sample(&mut rng) as u64));
            }
            if !themes.is_empty() && rng.random_bool(config.salt_fraction) {
                let theme = themes.choose(&mut rng).expect("nonempty");
                let kw = theme.keywords.choose(&mut rng).expect("themes have keywords");
                if let Some(tag) = kw.strip_prefix('#') {
                    planted.hashtags.push(random_case(tag, &mut rng));
                } else if let Some(user) = kw.strip_prefix('@') {
                    planted.mentions.push(user.to_string());
                } else {
                    let at = rng.random_range(0..=planted.words.len());
                    for (k, w) in kw.split_whitespace().enumerate() {
                        planted.words.insert(at + k, random_case(w, &mut rng));
                    }
                }
                for t in themes {
                    if t.keywords.contains(kw) {
                        planted.themes.insert(t.name.clone());
                    }
                }
            }
            if planted.text().is_empty() {
                planted.words.push(random_case(words.choose(&mut rng).expect("nonempty"), &mut rng));
            }
            let tweet = Tweet {
                id,
                created_at,
                user_id: user,
                screen_name: user_name(user),
                text: planted.text(),
                retweet_of_user_id: None,
                retweet_of_screen_name: None,
                entities: None,
            };
            (tweet, planted)
        };

        let routed = !planted.themes.is_empty();
        if routed {
            ledger.routed += 1;
            for t in &planted.themes {
                *ledger.theme_salting.entry(t.clone()).or_default() += 1;
            }
        }
        let minute = format_timestamp(&(created_at - Duration::seconds(created_at.timestamp().rem_euclid(60))));
        for meme in planted.memes() {
            let counts = ledger.memes.entry(meme.clone()).or_default();
            counts.tweets += 1;
            if routed {
                counts.routed += 1;
                *ledger.per_minute.entry(meme).or_default().entry(minute.clone()).or_default() += 1;
            }
        }

        if !retweet {
            originals.push((tweets.len(), planted));
        }
        tweets.push(tweet);
    }
    Ok(Corpus { tweets, ledger })
}
