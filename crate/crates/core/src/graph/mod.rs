//! Per-meme diffusion networks.
//!
//! Nodes are users. A retweet adds an edge from the original author to the
//! retweeter; a mention adds an edge from the tweet author to the mentioned
//! user. Repeated events between the same pair increment the edge weight.

mod components;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use components::{ComponentTracker, DisjointSet};

use crate::meme::MemeKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeType {
    Mention,
    Retweet,
}

impl EdgeType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Mention => "mention",
            EdgeType::Retweet => "retweet",
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mention" => Ok(EdgeType::Mention),
            "retweet" => Ok(EdgeType::Retweet),
            other => Err(format!("unknown edge type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserNode {
    pub user_id: u64,
    pub screen_name: String,
    /// Tweets in this meme authored by the user.
    pub tweet_count: u64,
    /// Times the user's content in this meme was retweeted.
    pub retweeted_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey {
    pub source: u64,
    pub target: u64,
    pub edge_type: EdgeType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeData {
    pub weight: u64,
    #[serde(with = "crate::tweet::rfc3339")]
    pub first_seen: DateTime<Utc>,
    #[serde(with = "crate::tweet::rfc3339")]
    pub last_seen: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserRef {
    pub id: u64,
    pub screen_name: String,
}

impl UserRef {
    pub fn new(id: u64, screen_name: impl Into<String>) -> Self {
        Self { id, screen_name: screen_name.into() }
    }
}

/// The diffusion-relevant content of one tweet, with users resolved to ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffusionEvent {
    pub created_at: DateTime<Utc>,
    pub author: UserRef,
    pub retweet_of: Option<UserRef>,
    pub mentions: Vec<UserRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionNetwork {
    pub meme: MemeKey,
    pub nodes: BTreeMap<u64, UserNode>,
    #[serde(with = "crate::serde_util::map_as_pairs")]
    pub edges: BTreeMap<EdgeKey, EdgeData>,
    pub tweet_count: u64,
    #[serde(with = "crate::tweet::rfc3339::option")]
    pub first_seen: Option<DateTime<Utc>>,
    #[serde(with = "crate::tweet::rfc3339::option")]
    pub last_seen: Option<DateTime<Utc>>,
    pub dropped_self_retweets: u64,
    pub dropped_self_mentions: u64,
    components: ComponentTracker,
}

impl DiffusionNetwork {
    pub fn new(meme: MemeKey) -> Self {
        Self {
            meme,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            tweet_count: 0,
            first_seen: None,
            last_seen: None,
            dropped_self_retweets: 0,
            dropped_self_mentions: 0,
            components: ComponentTracker::default(),
        }
    }

    fn upsert_node(&mut self, user: &UserRef) -> &mut UserNode {
        self.components.add_node(user.id);
        self.nodes.entry(user.id).or_insert_with(|| UserNode {
            user_id: user.id,
            screen_name: user.screen_name.clone(),
            tweet_count: 0,
            retweeted_count: 0,
        })
    }

    fn bump_edge(&mut self, source: u64, target: u64, edge_type: EdgeType, at: DateTime<Utc>) {
        self.edges
            .entry(EdgeKey { source, target, edge_type })
            .and_modify(|e| {
                e.weight += 1;
                e.first_seen = e.first_seen.min(at);
                e.last_seen = e.last_seen.max(at);
            })
            .or_insert(EdgeData { weight: 1, first_seen: at, last_seen: at });
        self.components.add_edge(source, target);
    }

    /// Applies one tweet known to belong to this meme.
    pub fn apply(&mut self, event: &DiffusionEvent) {
        let at = event.created_at;
        let author = self.upsert_node(&event.author);
        author.tweet_count += 1;
        // The author's handle as of their latest tweet wins.
        if author.screen_name != event.author.screen_name {
            author.screen_name.clone_from(&event.author.screen_name);
        }

        if let Some(origin) = &event.retweet_of {
            if origin.id == event.author.id {
                self.dropped_self_retweets += 1;
            } else {
                self.upsert_node(origin).retweeted_count += 1;
                self.bump_edge(origin.id, event.author.id, EdgeType::Retweet, at);
            }
        }

        let origin_id = event.retweet_of.as_ref().map(|o| o.id);
        let mut seen: Vec<u64> = Vec::with_capacity(event.mentions.len());
        for mentioned in &event.mentions {
            if Some(mentioned.id) == origin_id || seen.contains(&mentioned.id) {
                continue;
            }
            seen.push(mentioned.id);
            if mentioned.id == event.author.id {
                self.dropped_self_mentions += 1;
                continue;
            }
            self.upsert_node(mentioned);
            self.bump_edge(event.author.id, mentioned.id, EdgeType::Mention, at);
        }

        self.tweet_count += 1;
        self.first_seen = Some(self.first_seen.map_or(at, |t| t.min(at)));
        self.last_seen = Some(self.last_seen.map_or(at, |t| t.max(at)));
    }

    /// A point-in-time copy unaffected by later updates.
    pub fn snapshot(&self) -> NetworkSnapshot {
        NetworkSnapshot(Arc::new(self.clone()))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_count_of(&self, edge_type: EdgeType) -> usize {
        self.edges.keys().filter(|k| k.edge_type == edge_type).count()
    }

    /// Distinct undirected user pairs joined by at least one edge.
    pub fn collapsed_edge_count(&self) -> usize {
        self.components.pair_count()
    }

    /// Size of the largest connected component of the collapsed graph.
    pub fn largest_component(&self) -> usize {
        self.components.largest_component()
    }

    /// Undirected pairs `(min, max)` of the collapsed graph.
    pub fn collapsed_pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.components.pairs()
    }
}

/// Immutable shared view of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSnapshot(Arc<DiffusionNetwork>);

impl NetworkSnapshot {
    pub fn from_shared(network: Arc<DiffusionNetwork>) -> Self {
        Self(network)
    }
}

impl Deref for NetworkSnapshot {
    type Target = DiffusionNetwork;

    fn deref(&self) -> &DiffusionNetwork {
        &self.0
    }
}
