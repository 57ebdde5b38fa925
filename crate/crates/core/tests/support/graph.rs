//! From-scratch graph oracles, random networks and export re-importers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use truthy_core::graph::{DiffusionEvent, DiffusionNetwork, UserRef};
use truthy_core::meme::MemeKey;

pub fn t0() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2010-10-01T00:00:00Z").unwrap().with_timezone(&Utc)
}

pub fn user(id: u64) -> UserRef {
    UserRef::new(id, format!("u{id}"))
}

/// Undirected adjacency without self-loops.
pub fn adjacency(
    nodes: impl IntoIterator<Item = u64>,
    edges: impl IntoIterator<Item = (u64, u64)>,
) -> BTreeMap<u64, BTreeSet<u64>> {
    let mut adj: BTreeMap<u64, BTreeSet<u64>> = nodes.into_iter().map(|n| (n, BTreeSet::new())).collect();
    for (a, b) in edges {
        if a != b {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
    }
    adj
}

pub fn network_adjacency(net: &DiffusionNetwork) -> BTreeMap<u64, BTreeSet<u64>> {
    adjacency(net.nodes.keys().copied(), net.edges.keys().map(|k| (k.source, k.target)))
}

pub fn bfs_lcc(adj: &BTreeMap<u64, BTreeSet<u64>>) -> usize {
    let mut seen = BTreeSet::new();
    let mut best = 0;
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            size += 1;
            for &m in &adj[&n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        best = best.max(size);
    }
    best
}

pub fn degree_sum_mean(adj: &BTreeMap<u64, BTreeSet<u64>>) -> f64 {
    if adj.is_empty() {
        return 0.0;
    }
    adj.values().map(|s| s.len()).sum::<usize>() as f64 / adj.len() as f64
}

/// G(n, p) over users 1..=n; each sampled pair becomes a retweet or mention
/// event with a random direction. Some users only tweet.
pub fn gnp_network(rng: &mut ChaCha8Rng, n: u64, p: f64) -> DiffusionNetwork {
    let mut net = DiffusionNetwork::new(MemeKey::hashtag("g"));
    let mut step = 0;
    for a in 1..=n {
        if rng.random_bool(0.3) {
            net.apply(&DiffusionEvent { created_at: t0(), author: user(a), retweet_of: None, mentions: vec![] });
        }
        for b in a + 1..=n {
            if !rng.random_bool(p) {
                continue;
            }
            step += 1;
            let (src, dst) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let at = t0() + Duration::seconds(step);
            let event = if rng.random_bool(0.5) {
                DiffusionEvent { created_at: at, author: user(dst), retweet_of: Some(user(src)), mentions: vec![] }
            } else {
                DiffusionEvent { created_at: at, author: user(src), retweet_of: None, mentions: vec![user(dst)] }
            };
            net.apply(&event);
        }
    }
    net
}

/// 1000 G(n <= 50, p) graphs over three densities; returns the first failure.
pub fn check_gnp_oracles(seed: u64, count: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let n = rng.random_range(1..=50);
        let p = [0.02, 0.1, 0.3][i % 3];
        let net = gnp_network(&mut rng, n, p);
        let adj = network_adjacency(&net);
        let lcc = truthy_core::analytics::largest_connected_component(&net);
        if lcc != bfs_lcc(&adj) {
            return Err(format!("graph {i}: lcc {lcc} != bfs {}", bfs_lcc(&adj)));
        }
        let md = truthy_core::analytics::mean_degree(&net);
        if (md - degree_sum_mean(&adj)).abs() > 1e-12 {
            return Err(format!("graph {i}: mean degree {md} != {}", degree_sum_mean(&adj)));
        }
    }
    Ok(())
}

/// A network with random events, odd screen names and self-edges.
pub fn random_network(rng: &mut ChaCha8Rng) -> DiffusionNetwork {
    let n = rng.random_range(0..40u64);
    let mut net = DiffusionNetwork::new(MemeKey::hashtag("rt"));
    let events = if n == 0 { 0 } else { rng.random_range(0..3 * n) };
    for s in 0..events {
        let author = rng.random_range(1..=n);
        let name = |id: u64| if id.is_multiple_of(5) { format!("<u&{id}>") } else { format!("u{id}") };
        let retweet_of = rng.random_bool(0.4).then(|| {
            let o = rng.random_range(1..=n);
            UserRef::new(o, name(o))
        });
        let mentions = (0..rng.random_range(0..3)).map(|_| {
            let m = rng.random_range(1..=n);
            UserRef::new(m, name(m))
        });
        net.apply(&DiffusionEvent {
            created_at: t0() + Duration::seconds(s as i64 * 7),
            author: UserRef::new(author, name(author)),
            retweet_of,
            mentions: mentions.collect(),
        });
    }
    net
}

/// A graph as read back from an export.
#[derive(Debug, Default, PartialEq)]
pub struct Imported {
    pub nodes: BTreeSet<u64>,
    pub edges: BTreeMap<(u64, u64, String), u64>,
}

impl Imported {
    pub fn of(net: &DiffusionNetwork) -> Self {
        Imported {
            nodes: net.nodes.keys().copied().collect(),
            edges: net.edges.iter().map(|(k, d)| ((k.source, k.target, k.edge_type.to_string()), d.weight)).collect(),
        }
    }

    fn adj(&self) -> BTreeMap<u64, BTreeSet<u64>> {
        adjacency(self.nodes.iter().copied(), self.edges.keys().map(|(a, b, _)| (*a, *b)))
    }

    pub fn mean_degree(&self) -> f64 {
        degree_sum_mean(&self.adj())
    }

    pub fn lcc(&self) -> usize {
        bfs_lcc(&self.adj())
    }
}

pub fn load_edgelist(bytes: &[u8]) -> Result<Imported, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some("source\ttarget\ttype\tweight") {
        return Err("missing header".into());
    }
    let mut g = Imported::default();
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(format!("row `{line}`"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| format!("`{s}`: {e}"));
        let source = num(cols[0])?;
        g.nodes.insert(source);
        if cols[1].is_empty() {
            if !(cols[2].is_empty() && cols[3].is_empty()) {
                return Err(format!("isolated-node row `{line}`"));
            }
            continue;
        }
        let target = num(cols[1])?;
        g.nodes.insert(target);
        g.edges.insert((source, target, cols[2].to_string()), num(cols[3])?);
    }
    Ok(g)
}

pub fn load_json(bytes: &[u8]) -> Result<Imported, String> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let mut g = Imported::default();
    for n in v["nodes"].as_array().ok_or("no nodes")? {
        g.nodes.insert(n["id"].as_u64().ok_or("node id")?);
    }
    for l in v["links"].as_array().ok_or("no links")? {
        let (s, t) = (l["source"].as_u64().ok_or("source")?, l["target"].as_u64().ok_or("target")?);
        if !(g.nodes.contains(&s) && g.nodes.contains(&t)) {
            return Err(format!("link {s}->{t} references a missing node"));
        }
        g.edges.insert(
            (s, t, l["type"].as_str().ok_or("type")?.to_string()),
            l["weight"].as_u64().ok_or("weight")?,
        );
    }
    Ok(g)
}
