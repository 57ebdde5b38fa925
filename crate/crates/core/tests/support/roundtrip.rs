//! Export round trips through the independent loaders.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use truthy_core::analytics::{LabelSet, MemeStats, UserLabels};
use truthy_core::storage::{export_network, ExportFormat};

use super::graph::{load_edgelist, load_json, random_network, Imported};
use super::graphml;

type Loader = fn(&[u8]) -> Result<Imported, String>;

/// Exports `count` random labelled networks in every format and checks
/// that re-imported structure and statistics match the source.
pub fn check_export_roundtrip(count: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = LabelSet::default();
    for id in (1..40).step_by(3) {
        labels.insert(id, UserLabels { partisanship: Some(id as f64 / 40.0 - 0.5), language: Some("en".into()) });
    }
    for i in 0..count {
        let net = random_network(&mut rng);
        let stats = MemeStats::of(&net);
        let want = Imported::of(&net);
        for (format, loader) in [(ExportFormat::Edgelist, load_edgelist as Loader), (ExportFormat::Json, load_json)] {
            let bytes = export_network(&net, format, &labels);
            if bytes != export_network(&net, format, &labels) {
                return Err(format!("network {i}: {format:?} export is not deterministic"));
            }
            let got = loader(&bytes).map_err(|e| format!("network {i} via {format:?}: {e}"))?;
            if got != want {
                return Err(format!("network {i} via {format:?}: structure differs"));
            }
            if got.nodes.len() as u64 != stats.n_users
                || (got.mean_degree() - stats.mean_degree).abs() > 1e-12
                || got.lcc() as u64 != stats.lcc_size
            {
                return Err(format!("network {i} via {format:?}: statistics differ"));
            }
        }
        let xml = String::from_utf8(export_network(&net, ExportFormat::Graphml, &labels)).map_err(|e| e.to_string())?;
        let parsed = graphml::validate(&xml).map_err(|e| format!("network {i}: {e}"))?;
        if (parsed.nodes, parsed.edges) != (want.nodes.len(), want.edges.len()) {
            return Err(format!("network {i}: graphml counts {parsed:?}"));
        }
    }
    Ok(())
}
