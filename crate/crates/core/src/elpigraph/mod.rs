//! Elastic principal trees.
//!
//! A [`PrincipalGraph`] is a set of nodes embedded in data space joined by
//! edges. Its energy is the trimmed mean squared distance of the data to the
//! nearest node, plus edge-stretching and star-bending penalties. For a
//! fixed topology the energy is minimized by alternating a nearest-node
//! partition with one symmetric linear solve ([`fit_nodes`]). Topologies are
//! searched greedily with the "add a node to a node" and "bisect an edge"
//! rewrites ([`grow_tree`]).

mod energy;
mod fit;
mod graph;
mod grammar;
mod postprocess;
mod project;

pub use energy::{compute_energy, lambda_penalized, partition_points, Energy, PartitionVector};
pub use fit::{fit_nodes, optimal_positions, FitOptions, FitResult};
pub use grammar::{grow_tree, initial_graph, GrowOptions, GrowResult, GrammarOp};
pub use graph::{ElasticParams, PrincipalGraph, Provenance};
pub use postprocess::{extend_leaves, prune_tree, EXTENSION_MARGIN};
pub use project::{explained_variance, project_point, squared_distance_to_graph, Projection};

/// Read-only view of a complete data matrix in row-major order.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    pub values: &'a [f64],
    pub rows: usize,
    pub dim: usize,
}

impl<'a> DataView<'a> {
    pub fn new(values: &'a [f64], dim: usize) -> Self {
        DataView {
            values,
            rows: if dim == 0 { 0 } else { values.len() / dim },
            dim,
        }
    }

    pub fn from_matrix(m: &'a crate::dataset::NumericMatrix) -> crate::Result<Self> {
        m.require_complete()?;
        Ok(DataView {
            values: m.values(),
            rows: m.rows(),
            dim: m.cols(),
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
