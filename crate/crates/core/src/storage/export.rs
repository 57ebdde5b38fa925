//! Network downloads: tab-separated edge list, GraphML and JSON node-link.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::LabelSet;
use crate::graph::DiffusionNetwork;
use crate::tweet::format_timestamp;

use super::StorageError;

pub const EDGELIST_HEADER: &str = "source\ttarget\ttype\tweight";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExportFormat {
    Edgelist,
    Graphml,
    Json,
}

impl ExportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportFormat::Edgelist => "edgelist",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Json => "json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Edgelist => "text/tab-separated-values; charset=utf-8",
            ExportFormat::Graphml => "application/graphml+xml; charset=utf-8",
            ExportFormat::Json => "application/json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = StorageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edgelist" => Ok(ExportFormat::Edgelist),
            "graphml" => Ok(ExportFormat::Graphml),
            "json" => Ok(ExportFormat::Json),
            other => Err(StorageError::UnknownFormat(other.to_string())),
        }
    }
}

/// Serializes a network. Output depends only on the network contents and the
/// labels, so equal snapshots give equal bytes.
pub fn export_network(network: &DiffusionNetwork, format: ExportFormat, labels: &LabelSet) -> Vec<u8> {
    match format {
        ExportFormat::Edgelist => edgelist(network).into_bytes(),
        ExportFormat::Graphml => graphml(network, labels).into_bytes(),
        ExportFormat::Json => json(network, labels),
    }
}

/// Header, one row per directed typed edge in `(source, target, type)` order,
/// then one `id\t\t\t` row per user without edges.
fn edgelist(network: &DiffusionNetwork) -> String {
    let mut out = String::with_capacity(32 * (network.edges.len() + 1));
    out.push_str(EDGELIST_HEADER);
    out.push('\n');
    let mut linked = std::collections::BTreeSet::new();
    for (key, data) in &network.edges {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", key.source, key.target, key.edge_type, data.weight);
        linked.insert(key.source);
        linked.insert(key.target);
    }
    for id in network.nodes.keys().filter(|id| !linked.contains(id)) {
        let _ = writeln!(out, "{id}\t\t\t");
    }
    out
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const GRAPHML_KEYS: &[(&str, &str, &str)] = &[
    ("meme", "graph", "string"),
    ("screen_name", "node", "string"),
    ("tweet_count", "node", "long"),
    ("retweeted_count", "node", "long"),
    ("partisanship", "node", "double"),
    ("type", "edge", "string"),
    ("weight", "edge", "long"),
    ("first_seen", "edge", "string"),
    ("last_seen", "edge", "string"),
];

fn graphml(network: &DiffusionNetwork, labels: &LabelSet) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    for (id, domain, ty) in GRAPHML_KEYS {
        let _ = writeln!(out, "  <key id=\"{id}\" for=\"{domain}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>");
    }
    out.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
    let _ = writeln!(out, "    <data key=\"meme\">{}</data>", escape_xml(&network.meme.to_string()));
    for node in network.nodes.values() {
        let _ = writeln!(out, "    <node id=\"n{}\">", node.user_id);
        let _ = writeln!(out, "      <data key=\"screen_name\">{}</data>", escape_xml(&node.screen_name));
        let _ = writeln!(out, "      <data key=\"tweet_count\">{}</data>", node.tweet_count);
        let _ = writeln!(out, "      <data key=\"retweeted_count\">{}</data>", node.retweeted_count);
        if let Some(p) = labels.partisanship(node.user_id) {
            let _ = writeln!(out, "      <data key=\"partisanship\">{p}</data>");
        }
        out.push_str("    </node>\n");
    }
    for (i, (key, data)) in network.edges.iter().enumerate() {
        let _ = writeln!(out, "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\">", key.source, key.target);
        let _ = writeln!(out, "      <data key=\"type\">{}</data>", key.edge_type);
        let _ = writeln!(out, "      <data key=\"weight\">{}</data>", data.weight);
        let _ = writeln!(out, "      <data key=\"first_seen\">{}</data>", format_timestamp(&data.first_seen));
        let _ = writeln!(out, "      <data key=\"last_seen\">{}</data>", format_timestamp(&data.last_seen));
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[derive(Serialize)]
struct JsonNode<'a> {
    id: u64,
    screen_name: &'a str,
    tweet_count: u64,
    retweeted_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    partisanship: Option<f64>,
}

#[derive(Serialize)]
struct JsonLink {
    source: u64,
    target: u64,
    #[serde(rename = "type")]
    edge_type: &'static str,
    weight: u64,
    first_seen: String,
    last_seen: String,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    meme: String,
    nodes: Vec<JsonNode<'a>>,
    links: Vec<JsonLink>,
}

fn json(network: &DiffusionNetwork, labels: &LabelSet) -> Vec<u8> {
    let graph = JsonGraph {
        meme: network.meme.to_string(),
        nodes: network
            .nodes
            .values()
            .map(|n| JsonNode {
                id: n.user_id,
                screen_name: &n.screen_name,
                tweet_count: n.tweet_count,
                retweeted_count: n.retweeted_count,
                partisanship: labels.partisanship(n.user_id),
            })
            .collect(),
        links: network
            .edges
            .iter()
            .map(|(k, d)| JsonLink {
                source: k.source,
                target: k.target,
                edge_type: k.edge_type.as_str(),
                weight: d.weight,
                first_seen: format_timestamp(&d.first_seen),
                last_seen: format_timestamp(&d.last_seen),
            })
            .collect(),
    };
    serde_json::to_vec(&graph).expect("graph serializes")
}
