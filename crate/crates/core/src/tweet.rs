//! The tweet record and its line-delimited wire format.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum text length in Unicode code points. Longer texts are truncated.
pub const MAX_TEXT_CHARS: usize = 280;

/// Maximum length of a screen name.
pub const MAX_SCREEN_NAME_LEN: usize = 15;

/// Entities supplied alongside a record, before normalization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entities {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urls: Vec<String>,
}

impl Entities {
    pub fn is_empty(&self) -> bool {
        self.hashtags.is_empty() && self.mentions.is_empty() && self.urls.is_empty()
    }
}

/// One ingested message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: u64,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    pub user_id: u64,
    pub screen_name: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of_user_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of_screen_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Entities>,
}

impl Tweet {
    pub fn is_retweet(&self) -> bool {
        self.retweet_of_user_id.is_some()
    }

    /// Serializes the tweet as one wire-format line (without the trailing newline).
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("tweet serialization is infallible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    MalformedSyntax,
    MissingRequiredField,
    InvalidTimestamp,
    InvalidField,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed record: {0}")]
    MalformedSyntax(String),
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
}

impl ParseError {
    pub fn kind(&self) -> ParseErrorKind {
        match self {
            ParseError::MalformedSyntax(_) => ParseErrorKind::MalformedSyntax,
            ParseError::MissingRequiredField(_) => ParseErrorKind::MissingRequiredField,
            ParseError::InvalidTimestamp(_) => ParseErrorKind::InvalidTimestamp,
            ParseError::InvalidField { .. } => ParseErrorKind::InvalidField,
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<u64>,
    created_at: Option<String>,
    user_id: Option<u64>,
    screen_name: Option<String>,
    text: Option<String>,
    retweet_of_user_id: Option<u64>,
    retweet_of_screen_name: Option<String>,
    entities: Option<Entities>,
}

/// A successfully parsed record plus whether its text had to be truncated.
#[derive(Debug, Clone)]
pub struct ParsedRecord {
    pub tweet: Tweet,
    pub truncated: bool,
}

/// Parses one wire-format record. Texts above [`MAX_TEXT_CHARS`] are truncated.
pub fn parse_record(line: &[u8]) -> Result<Tweet, ParseError> {
    parse_record_detailed(line).map(|p| p.tweet)
}

pub fn parse_record_detailed(line: &[u8]) -> Result<ParsedRecord, ParseError> {
    let raw: RawRecord =
        serde_json::from_slice(line).map_err(|e| ParseError::MalformedSyntax(e.to_string()))?;

    let id = raw.id.ok_or(ParseError::MissingRequiredField("id"))?;
    let created_at = raw
        .created_at
        .ok_or(ParseError::MissingRequiredField("created_at"))?;
    let user_id = raw.user_id.ok_or(ParseError::MissingRequiredField("user_id"))?;
    let screen_name = raw
        .screen_name
        .ok_or(ParseError::MissingRequiredField("screen_name"))?;
    let text = raw.text.ok_or(ParseError::MissingRequiredField("text"))?;

    let created_at = parse_timestamp(&created_at)?;

    if !is_valid_screen_name(&screen_name) {
        return Err(ParseError::InvalidField {
            field: "screen_name",
            reason: format!("`{screen_name}` is not 1-15 characters of [A-Za-z0-9_]"),
        });
    }
    if text.is_empty() {
        return Err(ParseError::InvalidField {
            field: "text",
            reason: "text is empty".into(),
        });
    }
    match (&raw.retweet_of_user_id, &raw.retweet_of_screen_name) {
        (Some(_), None) => {
            return Err(ParseError::InvalidField {
                field: "retweet_of_screen_name",
                reason: "required when retweet_of_user_id is present".into(),
            })
        }
        (None, Some(_)) => {
            return Err(ParseError::InvalidField {
                field: "retweet_of_user_id",
                reason: "required when retweet_of_screen_name is present".into(),
            })
        }
        (_, Some(name)) if !is_valid_screen_name(name) => {
            return Err(ParseError::InvalidField {
                field: "retweet_of_screen_name",
                reason: format!("`{name}` is not 1-15 characters of [A-Za-z0-9_]"),
            })
        }
        _ => {}
    }

    let (text, truncated) = truncate_chars(text, MAX_TEXT_CHARS);

    Ok(ParsedRecord {
        tweet: Tweet {
            id,
            created_at,
            user_id,
            screen_name,
            text,
            retweet_of_user_id: raw.retweet_of_user_id,
            retweet_of_screen_name: raw.retweet_of_screen_name,
            entities: raw.entities,
        },
        truncated,
    })
}

pub fn is_valid_screen_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= MAX_SCREEN_NAME_LEN
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn truncate_chars(text: String, max: usize) -> (String, bool) {
    match text.char_indices().nth(max) {
        Some((cut, _)) => {
            let mut text = text;
            text.truncate(cut);
            (text, true)
        }
        None => (text, false),
    }
}

/// Parses an RFC 3339 timestamp and drops sub-second precision.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, ParseError> {
    let ts = DateTime::parse_from_rfc3339(s)
        .map_err(|_| ParseError::InvalidTimestamp(s.to_string()))?
        .with_timezone(&Utc);
    Ok(DateTime::from_timestamp(ts.timestamp(), 0).expect("in range"))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Serde adapter writing `2010-09-01T12:00:00Z`-style timestamps.
pub mod rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        super::parse_timestamp(&s).map_err(D::Error::custom)
    }

    pub mod option {
        use chrono::{DateTime, Utc};
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(ts: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
            match ts {
                Some(ts) => s.serialize_some(&super::super::format_timestamp(ts)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<DateTime<Utc>>, D::Error> {
            let s = Option::<String>::deserialize(d)?;
            s.map(|s| super::super::parse_timestamp(&s).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}
