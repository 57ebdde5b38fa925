use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::meme::MemeKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceEntry {
    pub meme_a: MemeKey,
    pub meme_b: MemeKey,
    /// Tweets containing both memes.
    pub joint_count: u64,
    pub jaccard: f64,
}

impl CooccurrenceEntry {
    /// Builds an entry from the joint count and both marginal tweet counts.
    pub fn new(meme_a: MemeKey, meme_b: MemeKey, joint: u64, count_a: u64, count_b: u64) -> Self {
        let union = count_a + count_b - joint;
        let jaccard = if union == 0 { 0.0 } else { joint as f64 / union as f64 };
        Self { meme_a, meme_b, joint_count: joint, jaccard }
    }
}

/// Symmetric joint counts between memes identified by dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceIndex {
    partners: Vec<BTreeMap<u32, u64>>,
}

impl CooccurrenceIndex {
    /// Counts one tweet containing the given memes. Each unordered pair of
    /// distinct ids is incremented once.
    pub fn record(&mut self, memes: &[u32]) {
        let mut ids = memes.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if let Some(&max) = ids.last() {
            if self.partners.len() <= max as usize {
                self.partners.resize_with(max as usize + 1, BTreeMap::new);
            }
        }
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                *self.partners[a as usize].entry(b).or_default() += 1;
                *self.partners[b as usize].entry(a).or_default() += 1;
            }
        }
    }

    pub fn joint(&self, a: u32, b: u32) -> u64 {
        if a == b {
            return 0;
        }
        self.partners
            .get(a as usize)
            .and_then(|p| p.get(&b))
            .copied()
            .unwrap_or(0)
    }

    /// Partners of `a` with their joint counts, ordered by partner id.
    pub fn partners(&self, a: u32) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.partners
            .get(a as usize)
            .into_iter()
            .flat_map(|p| p.iter().map(|(&b, &n)| (b, n)))
    }

    /// Every unordered pair `(a, b)` with `a < b` and its joint count.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        self.partners.iter().enumerate().flat_map(|(a, p)| {
            p.iter()
                .filter(move |(&b, _)| b as usize > a)
                .map(move |(&b, &n)| (a as u32, b, n))
        })
    }
}

/// Orders entries by joint count, then Jaccard, then partner key, and keeps
/// the first `k`.
pub fn rank_cooccurrences(mut entries: Vec<CooccurrenceEntry>, k: usize) -> Vec<CooccurrenceEntry> {
    entries.sort_by(|x, y| {
        y.joint_count
            .cmp(&x.joint_count)
            .then_with(|| y.jaccard.partial_cmp(&x.jaccard).unwrap_or(Ordering::Equal))
            .then_with(|| x.meme_b.cmp(&y.meme_b))
    });
    entries.truncate(k);
    entries
}
