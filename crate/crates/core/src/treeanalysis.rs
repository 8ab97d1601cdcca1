//! Segments, root selection, pseudotime and trajectories of a principal tree.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elpigraph::{partition_points, project_point, DataView, PartitionVector, PrincipalGraph, Projection};
use crate::dataset::Num;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// Both ends are branching nodes.
    Internal,
    /// At least one end is a leaf.
    Terminal,
    Cycle,
    Isolated,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Internal => "internal",
            SegmentKind::Terminal => "terminal",
            SegmentKind::Cycle => "cycle",
            SegmentKind::Isolated => "isolated",
        }
    }
}

/// Maximal paths whose interior nodes all have degree 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDecomposition {
    /// Node paths. A cycle repeats its first node at the end.
    pub segments: Vec<Vec<usize>>,
    pub kinds: Vec<SegmentKind>,
    /// Segment index of every edge.
    pub edge_segment: Vec<usize>,
}

impl SegmentDecomposition {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Segments whose path contains `node`.
    pub fn segments_of_node(&self, node: usize) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|&s| self.segments[s].contains(&node))
            .collect()
    }

    pub fn edges_of_segment(&self, s: usize) -> Vec<usize> {
        (0..self.edge_segment.len())
            .filter(|&e| self.edge_segment[e] == s)
            .collect()
    }
}

/// Splits `g` into segments by walking from every node of degree other
/// than 2 and recording visited edges. Components made only of degree-2
/// nodes become single cycle segments.
pub fn decompose_segments(g: &PrincipalGraph) -> SegmentDecomposition {
    let deg = g.degrees();
    let inc = g.incidence();
    let edges = g.edges();
    let mut edge_segment = vec![usize::MAX; edges.len()];
    let mut segments = Vec::new();
    let mut kinds = Vec::new();
    let other = |e: usize, v: usize| if edges[e][0] == v { edges[e][1] } else { edges[e][0] };

    let walk = |id: usize, start: usize, first_edge: usize, edge_segment: &mut Vec<usize>| -> Vec<usize> {
        let mut path = vec![start];
        let mut e = first_edge;
        let mut cur = start;
        loop {
            edge_segment[e] = id;
            cur = other(e, cur);
            path.push(cur);
            if deg[cur] != 2 || cur == start {
                break;
            }
            match inc[cur].iter().find(|&&k| edge_segment[k] == usize::MAX) {
                Some(&k) => e = k,
                None => break,
            }
        }
        path
    };

    for v in 0..g.n_nodes() {
        if deg[v] == 0 {
            segments.push(vec![v]);
            kinds.push(SegmentKind::Isolated);
            continue;
        }
        if deg[v] == 2 {
            continue;
        }
        for &e in &inc[v] {
            if edge_segment[e] != usize::MAX {
                continue;
            }
            let path = walk(segments.len(), v, e, &mut edge_segment);
            let (a, b) = (path[0], *path.last().unwrap());
            let kind = if a == b {
                SegmentKind::Cycle
            } else if deg[a] == 1 || deg[b] == 1 {
                SegmentKind::Terminal
            } else {
                SegmentKind::Internal
            };
            segments.push(path);
            kinds.push(kind);
        }
    }
    // pure cycles
    for v in 0..g.n_nodes() {
        if let Some(&e) = inc[v].iter().find(|&&k| edge_segment[k] == usize::MAX) {
            let path = walk(segments.len(), v, e, &mut edge_segment);
            segments.push(path);
            kinds.push(SegmentKind::Cycle);
        }
    }
    SegmentDecomposition {
        segments,
        kinds,
        edge_segment,
    }
}

/// Segment label of every point: the segment of its nearest node, or for
/// a node shared by several segments, the one holding the second-nearest
/// node among those segments.
pub fn partition_by_segments(x: DataView<'_>, g: &PrincipalGraph, seg: &SegmentDecomposition) -> Result<Vec<usize>> {
    let partition = partition_points(x, g)?;
    let node_segments: Vec<Vec<usize>> = (0..g.n_nodes()).map(|v| seg.segments_of_node(v)).collect();
    let label = |i: usize| -> usize {
        let j = partition.nearest[i];
        let cands = &node_segments[j];
        if cands.len() == 1 {
            return cands[0];
        }
        let row = x.row(i);
        let mut best: Option<(usize, f64)> = None;
        for &s in cands {
            for &v in &seg.segments[s] {
                if v == j {
                    continue;
                }
                let d = crate::elpigraph::squared_distance(row, g.node(v));
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((s, d));
                }
            }
        }
        best.map_or(cands.first().copied().unwrap_or(0), |(s, _)| s)
    };
    Ok((0..x.rows).into_par_iter().with_min_len(1024).map(label).collect())
}

/// Node most significantly enriched in `target` by a 2x2 chi-square test
/// of "at this node" against "has the target label". Only positively
/// enriched nodes qualify; ties and the no-enrichment case resolve to the
/// lowest node index.
pub fn select_root<T: PartialEq>(g: &PrincipalGraph, partition: &PartitionVector, labels: &[T], target: &T) -> Result<usize> {
    if labels.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: partition.len(),
            found: labels.len(),
        });
    }
    let n = labels.len() as u64;
    let n_target = labels.iter().filter(|l| *l == target).count() as u64;
    if n_target == 0 {
        return Err(Error::ClassAbsent("target class has no points".into()));
    }
    let mut at_node = vec![0u64; g.n_nodes()];
    let mut target_at_node = vec![0u64; g.n_nodes()];
    for (i, &j) in partition.nearest.iter().enumerate() {
        at_node[j] += 1;
        if labels[i] == *target {
            target_at_node[j] += 1;
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for v in 0..g.n_nodes() {
        let a = target_at_node[v];
        let m = at_node[v];
        if (a as u128) * (n as u128) <= (m as u128) * (n_target as u128) {
            continue;
        }
        let chi2 = chi2_2x2(a, m - a, n_target - a, n - m - n_target + a);
        if best.is_none_or(|(_, c)| chi2 > c) {
            best = Some((v, chi2));
        }
    }
    Ok(best.map_or(0, |(v, _)| v))
}

fn chi2_2x2(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let n = a + b + c + d;
    let denom = (a + b) * (c + d) * (a + c) * (b + d);
    if denom == 0.0 {
        return 0.0;
    }
    n * (a * d - b * c).powi(2) / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: usize,
    /// Nodes from the root to a leaf.
    pub nodes: Vec<usize>,
}

impl Trajectory {
    pub fn leaf(&self) -> usize {
        *self.nodes.last().expect("trajectory is non-empty")
    }
}

fn parents(g: &PrincipalGraph, root: usize) -> Vec<usize> {
    let adj = g.adjacency();
    let mut parent = vec![usize::MAX; g.n_nodes()];
    parent[root] = root;
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                stack.push(v);
            }
        }
    }
    parent
}

fn check_root(g: &PrincipalGraph, root: usize) -> Result<()> {
    g.require_tree()?;
    if root >= g.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "root {root} out of range for {} nodes",
            g.n_nodes()
        )));
    }
    Ok(())
}

/// One root-to-leaf path per leaf other than the root, in leaf order.
pub fn extract_trajectories(g: &PrincipalGraph, root: usize) -> Result<Vec<Trajectory>> {
    check_root(g, root)?;
    let parent = parents(g, root);
    let mut out = Vec::new();
    for leaf in g.leaves() {
        if leaf == root {
            continue;
        }
        let mut path = vec![leaf];
        let mut v = leaf;
        while v != root {
            v = parent[v];
            path.push(v);
        }
        path.reverse();
        out.push(Trajectory {
            id: out.len(),
            nodes: path,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudotimeMetric {
    /// Geodesic distance in edges.
    #[default]
    EdgeCount,
    /// Geodesic distance as summed edge lengths.
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudotimeAssignment {
    pub root: usize,
    pub metric: PseudotimeMetric,
    pub projections: Vec<Projection>,
    pub pseudotime: Vec<f64>,
    /// Trajectories containing each point's projection edge.
    pub memberships: Vec<Vec<usize>>,
    pub trajectories: Vec<Trajectory>,
}

impl PseudotimeAssignment {
    pub fn len(&self) -> usize {
        self.pseudotime.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pseudotime.is_empty()
    }

    /// Points belonging to trajectory `id`.
    pub fn members(&self, id: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.memberships[i].contains(&id))
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "point_id,edge,epsilon,pt,trajectory_ids").map_err(io)?;
        for i in 0..self.len() {
            let ids: Vec<String> = self.memberships[i].iter().map(|t| t.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                i,
                self.projections[i].edge,
                Num(self.projections[i].epsilon),
                Num(self.pseudotime[i]),
                ids.join(";")
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Pseudotime of every point: the geodesic distance from the root to the
/// first endpoint of its projection edge, plus or minus the fractional
/// position along that edge.
pub fn compute_pseudotime(x: DataView<'_>, g: &PrincipalGraph, root: usize, metric: PseudotimeMetric) -> Result<PseudotimeAssignment> {
    check_root(g, root)?;
    if x.dim != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.dim,
        });
    }
    let hops = g.bfs_distances(root);
    let edges = g.edges();
    let edge_len: Vec<f64> = edges
        .iter()
        .map(|e| crate::elpigraph::squared_distance(g.node(e[0]), g.node(e[1])).sqrt())
        .collect();
    let geodesic: Vec<f64> = match metric {
        PseudotimeMetric::EdgeCount => hops.iter().map(|&h| h as f64).collect(),
        PseudotimeMetric::Euclidean => {
            let parent = parents(g, root);
            let mut order: Vec<usize> = (0..g.n_nodes()).collect();
            order.sort_by_key(|&v| hops[v]);
            let mut d = vec![0.0; g.n_nodes()];
            let lookup = |a: usize, b: usize| {
                edges
                    .iter()
                    .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
                    .expect("tree edge")
            };
            for v in order {
                if v != root {
                    d[v] = d[parent[v]] + edge_len[lookup(v, parent[v])];
                }
            }
            d
        }
    };
    let trajectories = extract_trajectories(g, root)?;
    let mut edge_traj = vec![Vec::new(); edges.len()];
    for t in &trajectories {
        for w in t.nodes.windows(2) {
            let k = edges
                .iter()
                .position(|e| (e[0] == w[0] && e[1] == w[1]) || (e[0] == w[1] && e[1] == w[0]))
                .expect("trajectory follows tree edges");
            edge_traj[k].push(t.id);
        }
    }
    let projections: Vec<Projection> = (0..x.rows)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| project_point(x.row(i), g))
        .collect::<Result<_>>()?;
    let mut pseudotime = Vec::with_capacity(x.rows);
    let mut memberships = Vec::with_capacity(x.rows);
    for p in &projections {
        let [a, b] = edges[p.edge];
        let step = match metric {
            PseudotimeMetric::EdgeCount => p.epsilon,
            PseudotimeMetric::Euclidean => p.epsilon * edge_len[p.edge],
        };
        let pt = if hops[a] < hops[b] {
            geodesic[a] + step
        } else {
            geodesic[a] - step
        };
        pseudotime.push(pt.max(0.0));
        memberships.push(edge_traj[p.edge].clone());
    }
    Ok(PseudotimeAssignment {
        root,
        metric,
        projections,
        pseudotime,
        memberships,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elpigraph::ElasticParams;

    fn graph(points: Vec<Vec<f64>>, edges: Vec<[usize; 2]>) -> PrincipalGraph {
        PrincipalGraph::from_points(&points, edges, ElasticParams::default()).unwrap()
    }

    fn path(n: usize) -> PrincipalGraph {
        graph(
            (0..n).map(|i| vec![i as f64, 0.0]).collect(),
            (1..n).map(|i| [i - 1, i]).collect(),
        )
    }

    #[test]
    fn path_is_one_terminal_segment() {
        let d = decompose_segments(&path(5));
        assert_eq!(d.segments, vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(d.kinds, vec![SegmentKind::Terminal]);
    }

    #[test]
    fn cycle_and_isolated() {
        let mut pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 1.0]).collect();
        pts.push(vec![9.0, 9.0]);
        let g = graph(pts, vec![[0, 1], [1, 2], [2, 3], [3, 4], [4, 0]]);
        let d = decompose_segments(&g);
        assert_eq!(d.len(), 2);
        assert!(d.kinds.contains(&SegmentKind::Cycle));
        assert!(d.kinds.contains(&SegmentKind::Isolated));
        assert!(d.edge_segment.iter().all(|&s| s != usize::MAX));
    }

    #[test]
    fn pseudotime_on_path() {
        let g = path(4);
        let data = [0.25, 0.0, 2.5, 3.0];
        let pt = compute_pseudotime(DataView::new(&data, 2), &g, 0, PseudotimeMetric::EdgeCount).unwrap();
        assert!((pt.pseudotime[0] - 0.25).abs() < 1e-12);
        assert!((pt.pseudotime[1] - 2.5).abs() < 1e-12);
        assert_eq!(pt.trajectories.len(), 1);
        let mid = extract_trajectories(&g, 1).unwrap();
        assert_eq!(mid.len(), 2);
    }

    #[test]
    fn root_enrichment() {
        let g = path(3);
        let p = PartitionVector {
            nearest: vec![0, 0, 1, 1, 2, 2],
            squared_distance: vec![0.0; 6],
            trimmed: vec![false; 6],
        };
        let labels = ["a", "b", "b", "b", "a", "a"];
        assert_eq!(select_root(&g, &p, &labels, &"a").unwrap(), 2);
        assert!(select_root(&g, &p, &labels, &"z").is_err());
        let flat = ["a", "b", "a", "b", "a", "b"];
        assert_eq!(select_root(&g, &p, &flat, &"a").unwrap(), 0);
    }
}
