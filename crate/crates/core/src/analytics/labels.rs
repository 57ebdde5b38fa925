use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::LoadError;
use crate::meme::MemeKey;

/// Externally supplied per-user labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserLabels {
    /// Negative leans left, positive leans right.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partisanship: Option<f64>,
    /// ISO 639-1 code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Deserialize)]
struct LabelLine {
    user_id: u64,
    #[serde(default)]
    partisanship: Option<f64>,
    #[serde(default)]
    language: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    labels: BTreeMap<u64, UserLabels>,
}

impl LabelSet {
    /// Reads `{"user_id":..,"partisanship":..,"language":..}` lines. Later
    /// lines for the same user replace earlier ones.
    pub fn load(reader: impl BufRead) -> Result<Self, LoadError> {
        let mut labels = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| LoadError::new(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: LabelLine =
                serde_json::from_str(&line).map_err(|e| LoadError::new(i + 1, e.to_string()))?;
            if let Some(p) = raw.partisanship {
                if !(-1.0..=1.0).contains(&p) {
                    return Err(LoadError::new(i + 1, format!("partisanship {p} outside [-1, 1]")));
                }
            }
            if let Some(lang) = &raw.language {
                if lang.len() != 2 || !lang.bytes().all(|b| b.is_ascii_lowercase()) {
                    return Err(LoadError::new(i + 1, format!("`{lang}` is not an ISO 639-1 code")));
                }
            }
            labels.insert(
                raw.user_id,
                UserLabels { partisanship: raw.partisanship, language: raw.language },
            );
        }
        Ok(Self { labels })
    }

    pub fn insert(&mut self, user_id: u64, labels: UserLabels) {
        self.labels.insert(user_id, labels);
    }

    pub fn get(&self, user_id: u64) -> Option<&UserLabels> {
        self.labels.get(&user_id)
    }

    pub fn partisanship(&self, user_id: u64) -> Option<f64> {
        self.labels.get(&user_id).and_then(|l| l.partisanship)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Static meme definitions, one `{"meme":"hashtag:p2","definition":".."}` per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Definitions {
    map: BTreeMap<MemeKey, String>,
}

#[derive(Deserialize)]
struct DefinitionLine {
    meme: String,
    definition: String,
}

impl Definitions {
    pub fn load(reader: impl BufRead) -> Result<Self, LoadError> {
        let mut map = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| LoadError::new(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: DefinitionLine =
                serde_json::from_str(&line).map_err(|e| LoadError::new(i + 1, e.to_string()))?;
            let key: MemeKey = raw.meme.parse().map_err(|e| LoadError::new(i + 1, format!("{e}")))?;
            map.insert(key, raw.definition);
        }
        Ok(Self { map })
    }

    pub fn get(&self, meme: &MemeKey) -> Option<&str> {
        self.map.get(meme).map(String::as_str)
    }
}
