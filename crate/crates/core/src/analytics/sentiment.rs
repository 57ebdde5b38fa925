use std::collections::HashMap;
use std::io::BufRead;

use super::LoadError;
use crate::meme::tokenize;

/// Word valences in `[-1, 1]`, keyed by lowercase word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    words: HashMap<String, f64>,
}

impl Lexicon {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self {
            words: pairs.into_iter().map(|(w, v)| (w.to_lowercase(), v.clamp(-1.0, 1.0))).collect(),
        }
    }

    /// Reads `word<TAB>valence` lines. Blank lines are skipped.
    pub fn load(reader: impl BufRead) -> Result<Self, LoadError> {
        let mut words = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| LoadError::new(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, valence) = line
                .split_once('\t')
                .ok_or_else(|| LoadError::new(i + 1, "expected word<TAB>valence"))?;
            let valence: f64 = valence
                .trim()
                .parse()
                .map_err(|_| LoadError::new(i + 1, format!("bad valence `{valence}`")))?;
            if !(-1.0..=1.0).contains(&valence) {
                return Err(LoadError::new(i + 1, format!("valence {valence} outside [-1, 1]")));
            }
            let word = word.trim().to_lowercase();
            if word.is_empty() {
                return Err(LoadError::new(i + 1, "empty word"));
            }
            words.insert(word, valence);
        }
        Ok(Self { words })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.words.get(word).copied()
    }
}

/// Mean valence of the lexicon words in `text`; `None` if none occur.
pub fn sentiment_score(text: &str, lexicon: &Lexicon) -> Option<f64> {
    let (sum, n) = tokenize(text)
        .iter()
        .filter_map(|t| lexicon.valence(t))
        .fold((0.0, 0u32), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / f64::from(n))
}
