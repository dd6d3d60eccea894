use serde::{Deserialize, Serialize};

use super::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    ModelVertex,
}

impl NodeKind {
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            NodeKind::Interior => [1.0, 0.0, 0.0],
            NodeKind::Boundary => [0.0, 1.0, 0.0],
            NodeKind::ModelVertex => [0.0, 0.0, 1.0],
        }
    }
}

/// Triangulated shape as seen by the graph value network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeGraph {
    pub node_positions: Vec<Point>,
    pub node_types: Vec<NodeKind>,
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Directed edges, two per undirected edge.
    pub directed: Vec<(usize, usize)>,
    /// Normalized relative position for each entry of `directed`.
    pub edge_attrs: Vec<[f64; 2]>,
    /// Polygon vertex index for each node, `None` unless a model vertex.
    pub model_vertex_map: Vec<Option<usize>>,
}

impl ShapeGraph {
    pub fn node_count(&self) -> usize {
        self.node_positions.len()
    }

    /// Node index of every model vertex, ordered by polygon vertex index.
    pub fn model_nodes(&self) -> Vec<usize> {
        let mut pairs: Vec<(usize, usize)> = self
            .model_vertex_map
            .iter()
            .enumerate()
            .filter_map(|(node, v)| v.map(|v| (v, node)))
            .collect();
        pairs.sort_unstable();
        pairs.into_iter().map(|(_, node)| node).collect()
    }

    pub fn node_features(&self) -> Vec<f64> {
        self.node_types.iter().flat_map(|k| k.one_hot()).collect()
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> ShapeGraph {
        let n = self.node_count();
        assert_eq!(perm.len(), n);
        let mut node_positions = vec![Point::default(); n];
        let mut node_types = vec![NodeKind::Interior; n];
        let mut model_vertex_map = vec![None; n];
        for i in 0..n {
            node_positions[perm[i]] = self.node_positions[i];
            node_types[perm[i]] = self.node_types[i];
            model_vertex_map[perm[i]] = self.model_vertex_map[i];
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]])
            .collect();
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v])))
            .collect();
        edges.sort_unstable();
        let directed = self.directed.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        ShapeGraph {
            node_positions,
            node_types,
            triangles,
            edges,
            directed,
            edge_attrs: self.edge_attrs.clone(),
            model_vertex_map,
        }
    }
}
