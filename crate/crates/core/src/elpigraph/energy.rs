use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{squared_distance, DataView, PrincipalGraph};
use crate::{Error, Result};

/// Nearest node of every data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionVector {
    pub nearest: Vec<usize>,
    pub squared_distance: Vec<f64>,
    /// Points farther than the trimming radius from every node.
    pub trimmed: Vec<bool>,
}

impl PartitionVector {
    pub fn len(&self) -> usize {
        self.nearest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest.is_empty()
    }

    /// Number of untrimmed points per node.
    pub fn counts(&self, n_nodes: usize) -> Vec<usize> {
        let mut c = vec![0; n_nodes];
        for (i, &j) in self.nearest.iter().enumerate() {
            if !self.trimmed[i] {
                c[j] += 1;
            }
        }
        c
    }
}

const PARALLEL_CHUNK: usize = 2048;

/// Exact nearest-node assignment; ties go to the lower node index.
pub fn partition_points(x: DataView<'_>, g: &PrincipalGraph) -> Result<PartitionVector> {
    if x.dim != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.dim,
        });
    }
    let r2 = g.params.r0 * g.params.r0;
    let n_nodes = g.n_nodes();
    let nearest_of = |i: usize| -> (usize, f64) {
        let row = x.row(i);
        let mut best = (0, f64::INFINITY);
        for j in 0..n_nodes {
            let d = squared_distance(row, g.node(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    };
    let pairs: Vec<(usize, f64)> = if x.rows >= 2 * PARALLEL_CHUNK {
        (0..x.rows).into_par_iter().with_min_len(PARALLEL_CHUNK).map(nearest_of).collect()
    } else {
        (0..x.rows).map(nearest_of).collect()
    };
    let trimmed = pairs.iter().map(|&(_, d)| d > r2).collect();
    let (nearest, squared_distance) = pairs.into_iter().unzip();
    Ok(PartitionVector {
        nearest,
        squared_distance,
        trimmed,
    })
}

/// Stretching modulus of edge `(a, b)` given node degrees.
pub fn lambda_penalized(params: &super::ElasticParams, deg_a: usize, deg_b: usize) -> f64 {
    let k = deg_a.max(deg_b).max(2);
    params.lambda + params.alpha * (k - 2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub total: f64,
    pub msd: f64,
    pub u_e: f64,
    pub u_r: f64,
}

pub(crate) fn elastic_terms(g: &PrincipalGraph) -> (f64, f64) {
    let deg = g.degrees();
    let u_e: f64 = g
        .edges()
        .iter()
        .map(|e| lambda_penalized(&g.params, deg[e[0]], deg[e[1]]) * squared_distance(g.node(e[0]), g.node(e[1])))
        .sum();
    let mut u_r = 0.0;
    if g.params.mu > 0.0 {
        let dim = g.dim();
        for (c, nbrs) in g.adjacency().iter().enumerate() {
            if nbrs.len() < 2 {
                continue;
            }
            let k = nbrs.len() as f64;
            let center = g.node(c);
            let mut dev = 0.0;
            for t in 0..dim {
                let mean = nbrs.iter().map(|&v| g.node(v)[t]).sum::<f64>() / k;
                dev += (center[t] - mean) * (center[t] - mean);
            }
            u_r += g.params.mu * dev;
        }
    }
    (u_e, u_r)
}

/// Energy of `g` for a given partition of `x`.
pub fn compute_energy(x: DataView<'_>, g: &PrincipalGraph, partition: &PartitionVector) -> Result<Energy> {
    if partition.len() != x.rows {
        return Err(Error::DimensionMismatch {
            expected: x.rows,
            found: partition.len(),
        });
    }
    if x.dim != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.dim,
        });
    }
    let r2 = g.params.r0 * g.params.r0;
    let msd = if x.rows == 0 {
        0.0
    } else {
        (0..x.rows)
            .map(|i| {
                let d = squared_distance(x.row(i), g.node(partition.nearest[i]));
                d.min(r2)
            })
            .sum::<f64>()
            / x.rows as f64
    };
    let (u_e, u_r) = elastic_terms(g);
    Ok(Energy {
        total: msd + u_e + u_r,
        msd,
        u_e,
        u_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elpigraph::ElasticParams;

    #[test]
    fn star_harmonicity() {
        let params = ElasticParams {
            mu: 0.3,
            ..Default::default()
        };
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.0, -1.0]];
        let mut g = PrincipalGraph::from_points(&pts, vec![[0, 1], [0, 2], [0, 3]], params).unwrap();
        let (_, u_r) = elastic_terms(&g);
        assert!(u_r.abs() < 1e-15);
        g.node_mut(0)[1] = 0.5;
        let (_, u_r) = elastic_terms(&g);
        assert!((u_r - 0.3 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn penalized_lambda() {
        let p = ElasticParams::default();
        assert_eq!(lambda_penalized(&p, 1, 2), p.lambda);
        assert!((lambda_penalized(&p, 4, 1) - (p.lambda + 2.0 * p.alpha)).abs() < 1e-15);
    }

    #[test]
    fn trimming_caps_contributions() {
        let params = ElasticParams {
            r0: 1.0,
            ..Default::default()
        };
        let g = PrincipalGraph::from_points(&[vec![0.0]], vec![], params).unwrap();
        let data = [0.5, 10.0];
        let x = DataView::new(&data, 1);
        let p = partition_points(x, &g).unwrap();
        assert_eq!(p.trimmed, vec![false, true]);
        let e = compute_energy(x, &g, &p).unwrap();
        assert!((e.msd - (0.25 + 1.0) / 2.0).abs() < 1e-15);
    }
}
