use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::energy::{compute_energy, lambda_penalized, partition_points, Energy, PartitionVector};
use super::{DataView, PrincipalGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_epochs: usize,
    /// Relative energy decrease below which fitting stops.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_epochs: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub graph: PrincipalGraph,
    pub partition: PartitionVector,
    pub energy: Energy,
    /// Energy before the first solve and after every epoch.
    pub trace: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

/// System matrix of the quadratic energy for a fixed partition.
pub(crate) fn system_matrix(g: &PrincipalGraph, counts: &[usize], n_points: usize) -> DMatrix<f64> {
    let v = g.n_nodes();
    let n = n_points.max(1) as f64;
    let mut a = DMatrix::<f64>::zeros(v, v);
    for (j, &c) in counts.iter().enumerate() {
        a[(j, j)] += c as f64 / n;
    }
    let deg = g.degrees();
    for e in g.edges() {
        let (p, q) = (e[0], e[1]);
        let l = lambda_penalized(&g.params, deg[p], deg[q]);
        a[(p, p)] += l;
        a[(q, q)] += l;
        a[(p, q)] -= l;
        a[(q, p)] -= l;
    }
    let mu = g.params.mu;
    if mu > 0.0 {
        for (c, nbrs) in g.adjacency().iter().enumerate() {
            if nbrs.len() < 2 {
                continue;
            }
            // b = e_c - mean of neighbor indicators; add mu * b b^T
            let w = 1.0 / nbrs.len() as f64;
            let mut support: Vec<(usize, f64)> = vec![(c, 1.0)];
            support.extend(nbrs.iter().map(|&u| (u, -w)));
            for &(r, br) in &support {
                for &(s, bs) in &support {
                    a[(r, s)] += mu * br * bs;
                }
            }
        }
    }
    a
}

/// Node positions minimizing the energy for a fixed partition.
pub fn optimal_positions(x: DataView<'_>, g: &PrincipalGraph, partition: &PartitionVector) -> Result<Vec<f64>> {
    let v = g.n_nodes();
    let dim = g.dim();
    let counts = partition.counts(v);
    let a = system_matrix(g, &counts, x.rows);
    let n = x.rows.max(1) as f64;
    let mut rhs = DMatrix::<f64>::zeros(v, dim);
    for i in 0..x.rows {
        if partition.trimmed[i] {
            continue;
        }
        let j = partition.nearest[i];
        for (t, &val) in x.row(i).iter().enumerate() {
            rhs[(j, t)] += val / n;
        }
    }
    let chol = a.cholesky().ok_or_else(|| {
        Error::Singular("elastic system is not positive definite (a node has no data and no edges)".into())
    })?;
    let sol = chol.solve(&rhs);
    let mut out = Vec::with_capacity(v * dim);
    for j in 0..v {
        for t in 0..dim {
            out.push(sol[(j, t)]);
        }
    }
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::Singular("elastic system produced non-finite positions".into()));
    }
    Ok(out)
}

/// Fits node positions for the fixed topology of `g` by alternating
/// partitioning and exact quadratic minimization.
pub fn fit_nodes(x: DataView<'_>, g: &PrincipalGraph, opts: FitOptions) -> Result<FitResult> {
    g.params.validate()?;
    if !g.is_connected() {
        return Err(Error::InvalidArgument("graph must be connected".into()));
    }
    if x.rows == 0 {
        return Err(Error::InsufficientData("no data points".into()));
    }
    let mut graph = g.clone();
    let mut partition = partition_points(x, &graph)?;
    let mut energy = compute_energy(x, &graph, &partition)?;
    let mut trace = vec![energy.total];
    let mut epochs = 0;
    let mut converged = false;
    for epoch in 1..=opts.max_epochs {
        if epoch > 1 && partition.trimmed.iter().all(|&t| t) {
            // the last move left every point beyond R0; nothing to solve for
            log::warn!("every point is trimmed after {} epochs; stopping", epoch - 1);
            break;
        }
        let positions = optimal_positions(x, &graph, &partition)?;
        graph.set_node_positions(positions);
        let next = partition_points(x, &graph)?;
        let next_energy = compute_energy(x, &graph, &next)?;
        trace.push(next_energy.total);
        epochs = epoch;
        let unchanged = next.nearest == partition.nearest && next.trimmed == partition.trimmed;
        let decrease = (energy.total - next_energy.total) / energy.total.abs().max(f64::MIN_POSITIVE);
        partition = next;
        energy = next_energy;
        if unchanged || decrease < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        graph,
        partition,
        energy,
        trace,
        epochs,
        converged,
    })
}
