use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Elasticity moduli and growth budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    /// Edge-stretching modulus.
    pub lambda: f64,
    /// Star-bending modulus.
    pub mu: f64,
    /// Branching penalty added to the stretching modulus of edges touching
    /// nodes of degree above 2.
    pub alpha: f64,
    /// Trimming radius; `null` in JSON means no trimming.
    #[serde(serialize_with = "ser_radius", deserialize_with = "de_radius")]
    pub r0: f64,
    pub n_nodes_target: usize,
}

fn ser_radius<S: Serializer>(r: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if r.is_finite() {
        s.serialize_some(r)
    } else {
        s.serialize_none()
    }
}

fn de_radius<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl Default for ElasticParams {
    fn default() -> Self {
        ElasticParams {
            lambda: 0.05,
            mu: 0.1,
            alpha: 0.01,
            r0: f64::INFINITY,
            n_nodes_target: 50,
        }
    }
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Error::Config {
            field: format!("elastic.{field}"),
            reason: reason.to_string(),
        };
        if !(self.lambda > 0.0) {
            return Err(bad("lambda", "must be positive"));
        }
        if !(self.mu >= 0.0) {
            return Err(bad("mu", "must be non-negative"));
        }
        if !(self.alpha >= 0.0) {
            return Err(bad("alpha", "must be non-negative"));
        }
        if !(self.r0 > 0.0) {
            return Err(bad("r0", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    pub energy: f64,
}

/// Nodes embedded in R^dim and the undirected edges between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalGraph {
    dim: usize,
    nodes: Vec<f64>,
    edges: Vec<[usize; 2]>,
    pub params: ElasticParams,
    pub provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    params: ElasticParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl PrincipalGraph {
    pub fn new(dim: usize, nodes: Vec<f64>, edges: Vec<[usize; 2]>, params: ElasticParams) -> Result<Self> {
        if dim == 0 || !nodes.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: nodes.len(),
            });
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("node positions must be finite".into()));
        }
        let n = nodes.len() / dim;
        for e in &edges {
            if e[0] >= n || e[1] >= n || e[0] == e[1] {
                return Err(Error::InvalidArgument(format!("invalid edge {e:?} for {n} nodes")));
            }
        }
        Ok(PrincipalGraph {
            dim,
            nodes,
            edges,
            params,
            provenance: None,
        })
    }

    /// Builds a graph from a list of node coordinates.
    pub fn from_points(points: &[Vec<f64>], edges: Vec<[usize; 2]>, params: ElasticParams) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument("ragged node coordinates".into()));
        }
        Self::new(dim, points.concat(), edges, params)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_positions(&self) -> &[f64] {
        &self.nodes
    }

    pub(crate) fn set_node_positions(&mut self, nodes: Vec<f64>) {
        debug_assert_eq!(nodes.len(), self.nodes.len());
        self.nodes = nodes;
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes()];
        for e in &self.edges {
            deg[e[0]] += 1;
            deg[e[1]] += 1;
        }
        deg
    }

    /// Neighbor lists in edge order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in &self.edges {
            adj[e[0]].push(e[1]);
            adj[e[1]].push(e[0]);
        }
        adj
    }

    /// Incident edge indices per node.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_nodes()];
        for (k, e) in self.edges.iter().enumerate() {
            inc[e[0]].push(k);
            inc[e[1]].push(k);
        }
        inc
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.degrees()
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn branching_nodes(&self) -> Vec<usize> {
        self.degrees()
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d > 2)
            .map(|(i, _)| i)
            .collect()
    }

    /// Edge-count distances from `source` (`usize::MAX` if unreachable).
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut dist = vec![usize::MAX; self.n_nodes()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes() == 0 || self.bfs_distances(0).iter().all(|&d| d != usize::MAX)
    }

    pub fn is_tree(&self) -> bool {
        self.n_nodes() >= 1 && self.n_edges() + 1 == self.n_nodes() && self.is_connected()
    }

    pub fn require_tree(&self) -> Result<()> {
        if self.is_tree() {
            Ok(())
        } else {
            Err(Error::NotATree(format!(
                "{} nodes, {} edges, connected: {}",
                self.n_nodes(),
                self.n_edges(),
                self.is_connected()
            )))
        }
    }

    pub(crate) fn add_node(&mut self, position: &[f64]) -> usize {
        self.nodes.extend_from_slice(position);
        self.n_nodes() - 1
    }

    pub(crate) fn add_edge(&mut self, a: usize, b: usize) {
        self.edges.push([a, b]);
    }

    pub(crate) fn replace_edge(&mut self, k: usize, e: [usize; 2]) {
        self.edges[k] = e;
    }

    /// Removes the given nodes and every incident edge, renumbering the
    /// remaining nodes in their original order.
    pub fn remove_nodes(&self, remove: &[usize]) -> PrincipalGraph {
        let n = self.n_nodes();
        let mut keep = vec![true; n];
        for &r in remove {
            keep[r] = false;
        }
        let mut new_index = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for i in 0..n {
            if keep[i] {
                new_index[i] = nodes.len() / self.dim;
                nodes.extend_from_slice(self.node(i));
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e[0]] && keep[e[1]])
            .map(|e| [new_index[e[0]], new_index[e[1]]])
            .collect();
        PrincipalGraph {
            dim: self.dim,
            nodes,
            edges,
            params: self.params,
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GraphJson {
            nodes: (0..self.n_nodes()).map(|i| self.node(i).to_vec()).collect(),
            edges: self.edges.clone(),
            params: self.params,
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphJson = serde_json::from_str(text)?;
        let mut g = Self::from_points(&doc.nodes, doc.edges, doc.params)?;
        g.provenance = doc.provenance;
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> PrincipalGraph {
        PrincipalGraph::from_points(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![[0, 1], [1, 2]],
            ElasticParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_keeps_infinite_radius() {
        let mut g = path3();
        g.provenance = Some(Provenance {
            seed: 7,
            epochs: 3,
            energy: 0.5,
        });
        let text = g.to_json().unwrap();
        assert!(text.contains("\"r0\": null"));
        let back = PrincipalGraph::from_json(&text).unwrap();
        assert_eq!(back, g);
        assert!(back.params.r0.is_infinite());
    }

    #[test]
    fn tree_checks() {
        let g = path3();
        assert!(g.is_tree());
        assert_eq!(g.leaves(), vec![0, 2]);
        assert_eq!(g.bfs_distances(0), vec![0, 1, 2]);
        let r = g.remove_nodes(&[0]);
        assert_eq!(r.n_nodes(), 2);
        assert_eq!(r.edges(), &[[0, 1]]);
    }

    #[test]
    fn rejects_self_loops_and_bad_params() {
        assert!(PrincipalGraph::from_points(&[vec![0.0]], vec![[0, 0]], ElasticParams::default()).is_err());
        let p = ElasticParams {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
