//! JSON checkpoints for trained recurrent models.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DatasetOptions, DatasetScalers};
use crate::geo::{normalized_adjacency, StreetGraph};
use crate::models::{Arch, Forcing, GraphBinding, Layout, RecurrentModel};
use crate::training::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub arch: Arch,
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    pub dt: f64,
    pub forcing: Forcing,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub scalers: DatasetScalers,
    pub dataset: DatasetOptions,
    /// Content hash of the street graph a CT-GRN was trained on.
    pub graph_hash: Option<String>,
    pub train: Option<TrainConfig>,
}

/// Builds the binding a CT-GRN needs from a street graph with attached POIs.
pub fn bind_graph(graph: &StreetGraph) -> Arc<GraphBinding> {
    Arc::new(GraphBinding {
        adjacency: normalized_adjacency(graph),
        poi_nodes: graph.poi_nodes(),
        graph_hash: graph.content_hash(),
    })
}

impl Checkpoint {
    pub fn from_model(
        model: &RecurrentModel,
        scalers: &DatasetScalers,
        dataset: DatasetOptions,
        train: Option<TrainConfig>,
    ) -> Self {
        Checkpoint {
            version: FORMAT_VERSION,
            arch: model.arch,
            input_size: model.input_size,
            hidden_size: model.hidden_size,
            output_size: model.output_size,
            dt: model.dt,
            forcing: model.forcing,
            layout: model.layout.clone(),
            params: model.params.clone(),
            scalers: scalers.clone(),
            dataset,
            graph_hash: model.graph.as_ref().map(|g| g.graph_hash.clone()),
            train,
        }
    }

    /// Rebuilds the model. CT-GRN checkpoints need the same street graph they were
    /// trained on, checked by content hash.
    pub fn to_model(&self, graph: Option<&StreetGraph>) -> Result<RecurrentModel> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", self.version)));
        }
        let binding = match (self.arch.is_graph(), graph) {
            (true, Some(g)) => {
                let actual = g.content_hash();
                let expected = self.graph_hash.clone().unwrap_or_default();
                if actual != expected {
                    return Err(Error::GraphHashMismatch { expected, actual });
                }
                Some(bind_graph(g))
            }
            (true, None) => return Err(Error::Checkpoint("ct-grn checkpoint needs its street graph".into())),
            (false, _) => None,
        };
        let mut m = RecurrentModel::zeros(self.arch, self.input_size, self.hidden_size, self.output_size, binding)?;
        if m.layout != self.layout || m.params.len() != self.params.len() {
            return Err(Error::Checkpoint("parameter layout does not match the architecture".into()));
        }
        m.params.copy_from_slice(&self.params);
        m.dt = self.dt;
        m.forcing = self.forcing;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Scaler;
    use crate::geo::{Edge, Node};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalers() -> DatasetScalers {
        DatasetScalers {
            counts: Some(Scaler { min: vec![0.0], max: vec![7.0] }),
            features: Scaler { min: vec![0.1], max: vec![0.3] },
            pings: None,
        }
    }

    fn graph(extra: f64) -> StreetGraph {
        let nodes = (0..3)
            .map(|i| Node { id: i, lat: 47.8 + i as f64 * 1e-3, lon: 13.0, poi: (i == 2).then_some(0) })
            .collect();
        let edges = vec![
            Edge { u: 0, v: 1, length_m: 100.0 + extra },
            Edge { u: 1, v: 2, length_m: 50.0 },
        ];
        StreetGraph::new(nodes, edges).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = RecurrentModel::init(Arch::Lstm, 3, 5, 1, None, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        Checkpoint::from_model(&m, &scalers(), DatasetOptions::default(), None).save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap().to_model(None).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn graph_hash_is_enforced() {
        let g = graph(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = RecurrentModel::init(Arch::CtGrn, 2, 3, 1, Some(bind_graph(&g)), &mut rng).unwrap();
        let ck = Checkpoint::from_model(&m, &scalers(), DatasetOptions::default(), None);
        assert_eq!(ck.to_model(Some(&g)).unwrap(), m);
        assert!(matches!(ck.to_model(Some(&graph(1.0))), Err(Error::GraphHashMismatch { .. })));
        assert!(ck.to_model(None).is_err());
    }
}
