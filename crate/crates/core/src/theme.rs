//! Keyword themes and tweet routing.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meme::{normalize_hashtag, normalize_mention, tokenize, TweetAnalysis};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("duplicate theme name `{0}`")]
    DuplicateName(String),
    #[error("theme `{0}` has no keywords")]
    EmptyKeywords(String),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub name: String,
    /// Lowercase keywords; `#tag` and `@user` keep their sigil.
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Keyword<'a> {
    Hashtag(&'a str),
    User(&'a str),
    Words(Vec<&'a str>),
}

fn classify(keyword: &str) -> Keyword<'_> {
    if let Some(tag) = keyword.strip_prefix('#') {
        Keyword::Hashtag(tag)
    } else if let Some(user) = keyword.strip_prefix('@') {
        Keyword::User(user)
    } else {
        Keyword::Words(keyword.split_whitespace().collect())
    }
}

fn normalize_keyword(raw: &str) -> Option<String> {
    let raw = raw.trim();
    if raw.starts_with('#') {
        normalize_hashtag(raw).map(|t| format!("#{t}"))
    } else if raw.starts_with('@') {
        normalize_mention(raw).map(|u| format!("@{u}"))
    } else {
        let words = tokenize(raw);
        (!words.is_empty()).then(|| words.join(" "))
    }
}

impl Theme {
    /// Builds a theme, normalizing keywords.
    pub fn new(name: impl Into<String>, keywords: &[&str]) -> Result<Self, ConfigError> {
        Self::validated(name.into(), keywords.iter().map(|k| k.to_string()).collect(), None, 0)
    }

    fn validated(
        name: String,
        keywords: Vec<String>,
        description: Option<String>,
        line: usize,
    ) -> Result<Self, ConfigError> {
        if name.trim().is_empty() {
            return Err(ConfigError::Malformed { line, reason: "theme name is empty".into() });
        }
        let mut normalized = Vec::with_capacity(keywords.len());
        for raw in &keywords {
            let kw = normalize_keyword(raw).ok_or_else(|| ConfigError::Malformed {
                line,
                reason: format!("keyword `{raw}` is empty after normalization"),
            })?;
            if !normalized.contains(&kw) {
                normalized.push(kw);
            }
        }
        if normalized.is_empty() {
            return Err(ConfigError::EmptyKeywords(name));
        }
        Ok(Self { name, keywords: normalized, description })
    }

    fn keyword_matches(keyword: &str, tweet: &TweetAnalysis) -> bool {
        match classify(keyword) {
            Keyword::Hashtag(tag) => tweet.hashtags.contains(tag),
            Keyword::User(user) => {
                tweet.author == user || tweet.mentions.iter().any(|m| m == user)
            }
            Keyword::Words(words) => tweet
                .tokens
                .windows(words.len())
                .any(|w| w.iter().zip(&words).all(|(a, b)| a == b)),
        }
    }
}

#[derive(Deserialize)]
struct ThemeLine {
    name: String,
    keywords: Vec<String>,
    #[serde(default)]
    description: Option<String>,
}

/// Reads one theme per line. Blank lines are skipped.
pub fn load_themes(reader: impl BufRead) -> Result<Vec<Theme>, ConfigError> {
    let mut themes: Vec<Theme> = Vec::new();
    let mut names = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| ConfigError::Malformed { line: lineno, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: ThemeLine = serde_json::from_str(&line)
            .map_err(|e| ConfigError::Malformed { line: lineno, reason: e.to_string() })?;
        let theme = Theme::validated(raw.name, raw.keywords, raw.description, lineno)?;
        if !names.insert(theme.name.clone()) {
            return Err(ConfigError::DuplicateName(theme.name));
        }
        themes.push(theme);
    }
    Ok(themes)
}

pub fn load_themes_file(path: &Path) -> Result<Vec<Theme>, ConfigError> {
    let file = std::fs::File::open(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_themes(std::io::BufReader::new(file))
}

/// True iff any keyword of `theme` matches. URLs never match keywords.
pub fn matches_theme(tweet: &TweetAnalysis, theme: &Theme) -> bool {
    theme.keywords.iter().any(|k| Theme::keyword_matches(k, tweet))
}

/// Names of all matching themes, in configuration order.
pub fn route(tweet: &TweetAnalysis, themes: &[Theme]) -> Vec<String> {
    themes
        .iter()
        .filter(|t| matches_theme(tweet, t))
        .map(|t| t.name.clone())
        .collect()
}
