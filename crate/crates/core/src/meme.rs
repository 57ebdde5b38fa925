//! Meme identity: entity extraction, normalization and phrase derivation.
//!
//! A meme is the set of tweets sharing a hashtag, a mentioned user, a
//! hyperlink or a phrase. Every tweet maps to a deterministic set of
//! [`MemeKey`]s; two tweets that differ only in the letter case of their
//! entities map to the same set.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tweet::{Entities, Tweet, MAX_SCREEN_NAME_LEN};

/// Minimum phrase length in code points.
pub const MIN_PHRASE_CHARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemeKind {
    Hashtag,
    Mention,
    Url,
    Phrase,
}

impl MemeKind {
    pub const ALL: [MemeKind; 4] = [MemeKind::Hashtag, MemeKind::Mention, MemeKind::Url, MemeKind::Phrase];

    pub fn as_str(self) -> &'static str {
        match self {
            MemeKind::Hashtag => "hashtag",
            MemeKind::Mention => "mention",
            MemeKind::Url => "url",
            MemeKind::Phrase => "phrase",
        }
    }

    /// Applies the normalization rule for this kind.
    pub fn normalize(self, raw: &str) -> Option<String> {
        match self {
            MemeKind::Hashtag => normalize_hashtag(raw),
            MemeKind::Mention => normalize_mention(raw),
            MemeKind::Url => {
                let url = normalize_url(raw);
                (!url.is_empty()).then_some(url)
            }
            MemeKind::Phrase => {
                let phrase = normalize_phrase(raw);
                (!phrase.is_empty()).then_some(phrase)
            }
        }
    }
}

impl fmt::Display for MemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemeKeyError {
    #[error("unknown meme kind `{0}`")]
    UnknownKind(String),
    #[error("meme key `{0}` is not of the form kind:value")]
    Malformed(String),
    #[error("meme value is empty after normalization")]
    EmptyValue,
}

impl FromStr for MemeKind {
    type Err = MemeKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hashtag" => Ok(MemeKind::Hashtag),
            "mention" => Ok(MemeKind::Mention),
            "url" => Ok(MemeKind::Url),
            "phrase" => Ok(MemeKind::Phrase),
            other => Err(MemeKeyError::UnknownKind(other.to_string())),
        }
    }
}

/// Canonical identity of a meme.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemeKey {
    pub kind: MemeKind,
    pub value: String,
}

impl MemeKey {
    /// Builds a key from a raw value, normalizing it for `kind`.
    pub fn new(kind: MemeKind, raw: &str) -> Result<Self, MemeKeyError> {
        let value = kind.normalize(raw).ok_or(MemeKeyError::EmptyValue)?;
        Ok(Self { kind, value })
    }

    pub fn hashtag(raw: &str) -> Self {
        Self::new(MemeKind::Hashtag, raw).expect("nonempty hashtag")
    }

    pub fn mention(raw: &str) -> Self {
        Self::new(MemeKind::Mention, raw).expect("nonempty mention")
    }
}

impl fmt::Display for MemeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.value)
    }
}

impl FromStr for MemeKey {
    type Err = MemeKeyError;

    /// Parses `kind:value`; the value may itself contain colons.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| MemeKeyError::Malformed(s.to_string()))?;
        MemeKey::new(kind.parse()?, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpanKind {
    Hashtag,
    Mention,
    Url,
}

#[derive(Debug, Clone)]
struct Span {
    kind: SpanKind,
    /// Byte range of the whole entity including its sigil.
    range: Range<usize>,
    /// Byte range of the value without the sigil.
    value: Range<usize>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_handle_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn url_prefix_len(rest: &str) -> Option<usize> {
    let bytes = rest.as_bytes();
    for prefix in ["http://", "https://"] {
        if bytes.len() >= prefix.len() && bytes[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes()) {
            return Some(prefix.len());
        }
    }
    None
}

fn run_end(text: &str, start: usize, pred: impl Fn(char) -> bool) -> usize {
    text[start..]
        .char_indices()
        .find(|&(_, c)| !pred(c))
        .map_or(text.len(), |(i, _)| start + i)
}

/// Finds entity spans left to right. Hashtag and mention sigils inside a URL
/// belong to the URL.
fn scan(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let c = rest.chars().next().expect("pos < len");
        if url_prefix_len(rest).is_some() {
            let end = run_end(text, pos, |c| !c.is_whitespace());
            spans.push(Span { kind: SpanKind::Url, range: pos..end, value: pos..end });
            pos = end;
            continue;
        }
        match c {
            '#' => {
                let start = pos + 1;
                let end = run_end(text, start, is_word_char);
                if end > start {
                    spans.push(Span { kind: SpanKind::Hashtag, range: pos..end, value: start..end });
                }
                pos = end;
            }
            '@' => {
                let start = pos + 1;
                let end = run_end(text, start, is_handle_char);
                // Longer runs are not valid handles.
                if end > start && end - start <= MAX_SCREEN_NAME_LEN {
                    spans.push(Span { kind: SpanKind::Mention, range: pos..end, value: start..end });
                }
                pos = end;
            }
            _ => pos += c.len_utf8(),
        }
    }
    spans
}

/// Extracts raw (pre-normalization) entities in order of appearance.
pub fn extract_entities(text: &str) -> Entities {
    let mut out = Entities::default();
    for span in scan(text) {
        let value = text[span.value.clone()].to_string();
        match span.kind {
            SpanKind::Hashtag => out.hashtags.push(value),
            SpanKind::Mention => out.mentions.push(value),
            SpanKind::Url => out.urls.push(value),
        }
    }
    out
}

fn normalize_sigiled(raw: &str, sigil: char) -> Option<String> {
    let value = raw
        .trim_start_matches(|c: char| c == sigil || c.is_whitespace())
        .trim_end()
        .to_lowercase();
    (!value.is_empty()).then_some(value)
}

/// Lowercases a hashtag. `None` when nothing remains.
pub fn normalize_hashtag(raw: &str) -> Option<String> {
    normalize_sigiled(raw, '#')
}

/// Lowercases a mentioned handle. `None` when nothing remains.
pub fn normalize_mention(raw: &str) -> Option<String> {
    normalize_sigiled(raw, '@')
}

/// Lowercases scheme and host, drops default ports and fragments, and drops
/// the lone `/` of an empty path. Unparseable input is returned verbatim.
pub fn normalize_url(raw: &str) -> String {
    match url::Url::parse(raw) {
        Ok(mut u) if matches!(u.scheme(), "http" | "https") => {
            u.set_fragment(None);
            let bare_root = u.path() == "/" && u.query().is_none();
            let mut s = String::from(u);
            if bare_root {
                s.pop();
            }
            s
        }
        _ => raw.to_string(),
    }
}

/// Lowercases and collapses whitespace runs to single spaces.
pub fn normalize_phrase(raw: &str) -> String {
    raw.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn leading_rt(text: &str) -> Option<Range<usize>> {
    let start = text.len() - text.trim_start().len();
    let token_end = text[start..]
        .find(char::is_whitespace)
        .map_or(text.len(), |i| start + i);
    let token = text[start..token_end].trim_end_matches(':');
    token.eq_ignore_ascii_case("rt").then_some(start..token_end)
}

/// Derives the phrase meme of a text: the residue after removing a leading
/// `RT`, every entity (with its sigil) and punctuation, lowercased with
/// collapsed whitespace. `None` if shorter than [`MIN_PHRASE_CHARS`].
pub fn derive_phrase(text: &str, entities: &Entities) -> Option<String> {
    let mut removed: Vec<Range<usize>> = scan(text).into_iter().map(|s| s.range).collect();
    removed.extend(leading_rt(text));

    let mut needles: Vec<String> = Vec::new();
    needles.extend(entities.hashtags.iter().map(|h| format!("#{}", h.trim_start_matches('#'))));
    needles.extend(entities.mentions.iter().map(|m| format!("@{}", m.trim_start_matches('@'))));
    needles.extend(entities.urls.iter().cloned());
    for needle in needles.iter().filter(|n| n.len() > 1) {
        removed.extend(text.match_indices(needle.as_str()).map(|(i, m)| i..i + m.len()));
    }

    let mut keep = vec![true; text.len()];
    for r in removed {
        keep[r].iter_mut().for_each(|k| *k = false);
    }

    let mut residue = String::with_capacity(text.len());
    for (i, c) in text.char_indices() {
        if !keep[i] {
            residue.push(' ');
        } else if c.is_alphanumeric() || c.is_whitespace() {
            residue.push(c);
        }
    }
    let phrase = normalize_phrase(&residue);
    (phrase.chars().count() >= MIN_PHRASE_CHARS).then_some(phrase)
}

/// Everything downstream stages need from one tweet's text, computed once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TweetAnalysis {
    /// Normalized hashtags (text and supplied entities), deduplicated.
    pub hashtags: BTreeSet<String>,
    /// Normalized mentioned handles in order of first appearance.
    pub mentions: Vec<String>,
    pub urls: BTreeSet<String>,
    pub phrase: Option<String>,
    /// Lowercase word tokens of the text with URLs excluded.
    pub tokens: Vec<String>,
    /// Lowercased author screen name.
    pub author: String,
    pub memes: BTreeSet<MemeKey>,
}

/// Merges supplied entities into text-derived ones.
fn merged_entities(tweet: &Tweet) -> Entities {
    let mut entities = extract_entities(&tweet.text);
    if let Some(given) = &tweet.entities {
        entities.hashtags.extend(given.hashtags.iter().cloned());
        entities.mentions.extend(given.mentions.iter().cloned());
        entities.urls.extend(given.urls.iter().cloned());
    }
    entities
}

/// Lowercase word tokens (runs of alphanumerics and `_`), URLs skipped.
pub fn tokenize(text: &str) -> Vec<String> {
    let spans = scan(text);
    let mut tokens = Vec::new();
    let mut pos = 0;
    let mut push_segment = |segment: &str| {
        tokens.extend(
            segment
                .split(|c: char| !is_word_char(c))
                .filter(|t| !t.is_empty())
                .map(str::to_lowercase),
        );
    };
    for span in spans.iter().filter(|s| s.kind == SpanKind::Url) {
        push_segment(&text[pos..span.range.start]);
        pos = span.range.end;
    }
    push_segment(&text[pos..]);
    tokens
}

pub fn analyze(tweet: &Tweet) -> TweetAnalysis {
    let entities = merged_entities(tweet);
    let mut out = TweetAnalysis {
        tokens: tokenize(&tweet.text),
        author: tweet.screen_name.to_lowercase(),
        ..Default::default()
    };
    for h in &entities.hashtags {
        if let Some(h) = normalize_hashtag(h) {
            out.memes.insert(MemeKey { kind: MemeKind::Hashtag, value: h.clone() });
            out.hashtags.insert(h);
        }
    }
    for m in &entities.mentions {
        if let Some(m) = normalize_mention(m) {
            if !out.mentions.contains(&m) {
                out.memes.insert(MemeKey { kind: MemeKind::Mention, value: m.clone() });
                out.mentions.push(m);
            }
        }
    }
    for u in &entities.urls {
        let u = normalize_url(u);
        if !u.is_empty() {
            out.memes.insert(MemeKey { kind: MemeKind::Url, value: u.clone() });
            out.urls.insert(u);
        }
    }
    out.phrase = derive_phrase(&tweet.text, &entities);
    if let Some(p) = &out.phrase {
        out.memes.insert(MemeKey { kind: MemeKind::Phrase, value: p.clone() });
    }
    out
}

/// The set of memes a tweet belongs to.
pub fn extract_memes(tweet: &Tweet) -> BTreeSet<MemeKey> {
    analyze(tweet).memes
}
