use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{squared_distance, DataView, PrincipalGraph};
use crate::linalg::column_means;
use crate::{Error, Result};

/// Closest point of the graph: position `epsilon` along edge `edge`,
/// measured from its first endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub edge: usize,
    pub epsilon: f64,
    pub squared_distance: f64,
}

fn project_on_segment(x: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut len2 = 0.0;
    let mut dot = 0.0;
    for t in 0..x.len() {
        let d = b[t] - a[t];
        len2 += d * d;
        dot += (x[t] - a[t]) * d;
    }
    let eps = if len2 > 0.0 { (dot / len2).clamp(0.0, 1.0) } else { 0.0 };
    let dist = x
        .iter()
        .zip(a.iter().zip(b))
        .map(|(xv, (av, bv))| {
            let p = av + eps * (bv - av);
            (xv - p) * (xv - p)
        })
        .sum();
    (eps, dist)
}

/// Orthogonal projection onto the nearest edge; ties go to the lower edge
/// index.
pub fn project_point(x: &[f64], g: &PrincipalGraph) -> Result<Projection> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.len(),
        });
    }
    if g.n_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let mut best = Projection {
        edge: 0,
        epsilon: 0.0,
        squared_distance: f64::INFINITY,
    };
    for (k, e) in g.edges().iter().enumerate() {
        let (eps, d) = project_on_segment(x, g.node(e[0]), g.node(e[1]));
        if d < best.squared_distance {
            best = Projection {
                edge: k,
                epsilon: eps,
                squared_distance: d,
            };
        }
    }
    Ok(best)
}

/// Squared distance to the graph as a union of its nodes and edges.
pub fn squared_distance_to_graph(x: &[f64], g: &PrincipalGraph) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.len(),
        });
    }
    let mut best = (0..g.n_nodes())
        .map(|j| squared_distance(x, g.node(j)))
        .fold(f64::INFINITY, f64::min);
    if g.n_edges() > 0 {
        best = best.min(project_point(x, g)?.squared_distance);
    }
    Ok(best)
}

/// Fraction of total variance explained by projecting onto the graph.
pub fn explained_variance(x: DataView<'_>, g: &PrincipalGraph) -> Result<f64> {
    if x.dim != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.dim,
        });
    }
    let mean = column_means(x.values, x.rows, x.dim);
    let total: f64 = (0..x.rows).map(|i| squared_distance(x.row(i), &mean)).sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("data has zero total variance".into()));
    }
    let residual: f64 = (0..x.rows)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| squared_distance_to_graph(x.row(i), g))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(1.0 - residual / total)
}
