use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::energy::PartitionVector;
use super::fit::{fit_nodes, FitOptions, FitResult};
use super::{DataView, ElasticParams, PrincipalGraph, Provenance};
use crate::linalg::{column_means, quantile, scatter_matrix, symmetric_eigen_desc};
use crate::{Error, Result};

/// One rewrite of the tree grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GrammarOp {
    AddNode { node: usize },
    BisectEdge { edge: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowOptions {
    /// Epoch budget for each candidate topology.
    pub candidate_epochs: usize,
    pub final_fit: FitOptions,
    /// Recorded in the graph provenance.
    pub seed: u64,
}

impl Default for GrowOptions {
    fn default() -> Self {
        GrowOptions {
            candidate_epochs: 10,
            final_fit: FitOptions {
                max_epochs: 200,
                tol: 1e-6,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrowResult {
    pub graph: PrincipalGraph,
    pub partition: PartitionVector,
    /// Operation chosen at each growth step.
    pub ops: Vec<GrammarOp>,
    /// Energy of the chosen candidate at each growth step.
    pub energy_history: Vec<f64>,
}

/// Two nodes on the first principal axis at the quartiles of the
/// projections. The axis sign is chosen so the first point that is off
/// the mean projects positively.
pub fn initial_graph(x: DataView<'_>, params: ElasticParams) -> Result<PrincipalGraph> {
    if x.rows < 2 {
        return Err(Error::InsufficientData("need at least 2 points to initialize".into()));
    }
    let dim = x.dim;
    let mean = column_means(x.values, x.rows, dim);
    let scatter = scatter_matrix(x.values, x.rows, dim, &mean);
    let (_, vectors) = symmetric_eigen_desc(&scatter);
    let mut axis: Vec<f64> = vectors.column(0).iter().copied().collect();
    let mut t: Vec<f64> = (0..x.rows)
        .map(|i| x.row(i).iter().zip(&mean).zip(&axis).map(|((v, m), a)| (v - m) * a).sum())
        .collect();
    let scale = t.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if let Some(&first) = t.iter().find(|v| v.abs() > 1e-9 * scale) {
        if first < 0.0 {
            axis.iter_mut().for_each(|a| *a = -*a);
            t.iter_mut().for_each(|v| *v = -*v);
        }
    }
    t.sort_by(|a, b| a.total_cmp(b));
    let lo = quantile(&t, 0.25);
    let hi = quantile(&t, 0.75);
    let place = |s: f64| -> Vec<f64> { mean.iter().zip(&axis).map(|(m, a)| m + s * a).collect() };
    PrincipalGraph::from_points(&[place(lo), place(hi)], vec![[0, 1]], params)
}

fn apply(g: &PrincipalGraph, x: DataView<'_>, partition: &PartitionVector, op: GrammarOp) -> PrincipalGraph {
    let mut out = g.clone();
    match op {
        GrammarOp::AddNode { node } => {
            let adj = g.adjacency();
            let pos: Vec<f64> = if adj[node].len() == 1 {
                let nb = g.node(adj[node][0]);
                g.node(node).iter().zip(nb).map(|(v, u)| 2.0 * v - u).collect()
            } else {
                let mut sum = vec![0.0; g.dim()];
                let mut count = 0usize;
                for (i, &j) in partition.nearest.iter().enumerate() {
                    if j == node && !partition.trimmed[i] {
                        count += 1;
                        sum.iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v);
                    }
                }
                if count == 0 {
                    g.node(node).to_vec()
                } else {
                    sum.iter().map(|s| s / count as f64).collect()
                }
            };
            let new = out.add_node(&pos);
            out.add_edge(node, new);
        }
        GrammarOp::BisectEdge { edge } => {
            let [a, b] = g.edges()[edge];
            let mid: Vec<f64> = g.node(a).iter().zip(g.node(b)).map(|(p, q)| 0.5 * (p + q)).collect();
            let new = out.add_node(&mid);
            out.replace_edge(edge, [a, new]);
            out.add_edge(new, b);
        }
    }
    out
}

/// Candidate rewrites in tie-break order: every node, then every edge.
fn candidates(g: &PrincipalGraph) -> Vec<GrammarOp> {
    (0..g.n_nodes())
        .map(|node| GrammarOp::AddNode { node })
        .chain((0..g.n_edges()).map(|edge| GrammarOp::BisectEdge { edge }))
        .collect()
}

/// Grows an elastic principal tree to `params.n_nodes_target` nodes.
pub fn grow_tree(x: DataView<'_>, params: ElasticParams, opts: GrowOptions) -> Result<GrowResult> {
    params.validate()?;
    let target = params.n_nodes_target;
    if target < 2 {
        return Err(Error::InvalidArgument("n_nodes_target must be at least 2".into()));
    }
    if x.rows < target {
        return Err(Error::InsufficientData(format!(
            "{} data points cannot support {target} nodes",
            x.rows
        )));
    }
    let candidate_opts = FitOptions {
        max_epochs: opts.candidate_epochs.max(1),
        tol: opts.final_fit.tol,
    };
    let init = initial_graph(x, params)?;
    let mut current = fit_nodes(x, &init, candidate_opts)?;
    let mut ops = Vec::new();
    let mut energy_history = Vec::new();
    while current.graph.n_nodes() < target {
        let ops_here = candidates(&current.graph);
        let fits: Vec<Option<FitResult>> = ops_here
            .par_iter()
            .map(|&op| {
                let g = apply(&current.graph, x, &current.partition, op);
                fit_nodes(x, &g, candidate_opts).ok()
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (k, f) in fits.iter().enumerate() {
            if let Some(f) = f {
                if best.is_none_or(|(_, e)| f.energy.total < e) {
                    best = Some((k, f.energy.total));
                }
            }
        }
        let (k, e) = best.ok_or_else(|| Error::Singular("no candidate topology could be fitted".into()))?;
        log::debug!("grow: {} nodes, {:?}, energy {e}", current.graph.n_nodes() + 1, ops_here[k]);
        ops.push(ops_here[k]);
        energy_history.push(e);
        current = fits.into_iter().nth(k).flatten().expect("chosen candidate exists");
    }
    let final_fit = fit_nodes(x, &current.graph, opts.final_fit)?;
    let mut graph = final_fit.graph;
    graph.provenance = Some(Provenance {
        seed: opts.seed,
        epochs: final_fit.epochs,
        energy: final_fit.energy.total,
    });
    Ok(GrowResult {
        graph,
        partition: final_fit.partition,
        ops,
        energy_history,
    })
}
