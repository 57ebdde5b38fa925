//! Dashboard statistics over meme networks.

mod cooccurrence;
mod labels;
mod sentiment;
mod timeseries;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cooccurrence::{rank_cooccurrences, CooccurrenceEntry, CooccurrenceIndex};
pub use labels::{Definitions, LabelSet, UserLabels};
pub use sentiment::{sentiment_score, Lexicon};
pub use timeseries::{time_series, Bucket, Interval, TimeSeries};

use crate::graph::{DiffusionNetwork, EdgeType};
use crate::meme::MemeKey;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("unknown meme `{0}`")]
    UnknownMeme(MemeKey),
    #[error("unknown user {0}")]
    UnknownUser(u64),
}

/// Line-oriented input file failed to load.
#[derive(Debug, Error)]
#[error("line {line}: {reason}")]
pub struct LoadError {
    pub line: usize,
    pub reason: String,
}

impl LoadError {
    pub(crate) fn new(line: usize, reason: impl Into<String>) -> Self {
        Self { line, reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifespan {
    #[serde(with = "crate::tweet::rfc3339::option")]
    pub first_seen: Option<DateTime<Utc>>,
    #[serde(with = "crate::tweet::rfc3339::option")]
    pub last_seen: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemeStats {
    pub meme: MemeKey,
    pub n_tweets: u64,
    pub n_users: u64,
    pub n_retweet_edges: u64,
    pub n_mention_edges: u64,
    pub mean_degree: f64,
    pub lcc_size: u64,
    pub lifespan: Lifespan,
}

impl MemeStats {
    pub fn of(network: &DiffusionNetwork) -> Self {
        Self {
            meme: network.meme.clone(),
            n_tweets: network.tweet_count,
            n_users: network.node_count() as u64,
            n_retweet_edges: network.edge_count_of(EdgeType::Retweet) as u64,
            n_mention_edges: network.edge_count_of(EdgeType::Mention) as u64,
            mean_degree: mean_degree(network),
            lcc_size: largest_connected_component(network) as u64,
            lifespan: Lifespan { first_seen: network.first_seen, last_seen: network.last_seen },
        }
    }
}

/// `2E/N` of the undirected simple graph obtained by merging edge directions
/// and types between each user pair. Zero for an empty network.
pub fn mean_degree(network: &DiffusionNetwork) -> f64 {
    let n = network.node_count();
    if n == 0 {
        return 0.0;
    }
    2.0 * network.collapsed_edge_count() as f64 / n as f64
}

/// Largest connected component of the collapsed undirected graph, maintained
/// incrementally as tweets are applied.
pub fn largest_connected_component(network: &DiffusionNetwork) -> usize {
    network.largest_component()
}
