use super::energy::partition_points;
use super::{DataView, PrincipalGraph};
use crate::{Error, Result};

/// Leaves are pushed this fraction of the terminal edge length past the
/// farthest projection.
pub const EXTENSION_MARGIN: f64 = 0.05;

/// Removes every leaf hanging directly off a branching node. One pass.
pub fn prune_tree(g: &PrincipalGraph) -> Result<PrincipalGraph> {
    g.require_tree()?;
    let deg = g.degrees();
    let adj = g.adjacency();
    let remove: Vec<usize> = (0..g.n_nodes())
        .filter(|&v| deg[v] == 1 && deg[adj[v][0]] > 2)
        .collect();
    if g.n_nodes() - remove.len() < 2 {
        return Err(Error::InvalidArgument(
            "pruning would leave fewer than 2 nodes".into(),
        ));
    }
    Ok(g.remove_nodes(&remove))
}

/// Moves each leaf outward along its terminal edge so that it lies beyond
/// the projections of the points assigned to it. Positions are computed
/// from the input graph, so leaves do not influence each other.
pub fn extend_leaves(x: DataView<'_>, g: &PrincipalGraph) -> Result<PrincipalGraph> {
    let partition = partition_points(x, g)?;
    let adj = g.adjacency();
    let dim = g.dim();
    let mut out = g.clone();
    for leaf in 0..g.n_nodes() {
        if adj[leaf].len() != 1 {
            continue;
        }
        let anchor = g.node(adj[leaf][0]);
        let tip = g.node(leaf);
        let len = tip.iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let dir: Vec<f64> = tip.iter().zip(anchor).map(|(a, b)| (a - b) / len).collect();
        let reach = (0..x.rows)
            .filter(|&i| partition.nearest[i] == leaf && !partition.trimmed[i])
            .map(|i| x.row(i).iter().zip(anchor).zip(&dir).map(|((v, a), d)| (v - a) * d).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        if reach > len {
            let s = reach + EXTENSION_MARGIN * len;
            let node = out.node_mut(leaf);
            for t in 0..dim {
                node[t] = anchor[t] + s * dir[t];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elpigraph::{project_point, ElasticParams};

    fn star(arms: &[usize]) -> PrincipalGraph {
        let mut pts = vec![vec![0.0, 0.0]];
        let mut edges = Vec::new();
        for (a, &len) in arms.iter().enumerate() {
            let angle = a as f64 * 2.0;
            let mut prev = 0;
            for s in 1..=len {
                pts.push(vec![s as f64 * angle.cos(), s as f64 * angle.sin()]);
                let cur = pts.len() - 1;
                edges.push([prev, cur]);
                prev = cur;
            }
        }
        PrincipalGraph::from_points(&pts, edges, ElasticParams::default()).unwrap()
    }

    #[test]
    fn prunes_single_edge_arm() {
        let g = star(&[1, 3, 3]);
        let p = prune_tree(&g).unwrap();
        assert_eq!(p.n_nodes(), 7);
        assert_eq!(p.degrees()[0], 2);
        assert!(p.is_tree());
    }

    #[test]
    fn path_unchanged() {
        let g = star(&[4]);
        assert_eq!(prune_tree(&g).unwrap(), g);
    }

    #[test]
    fn extension_covers_interval() {
        let data: Vec<f64> = (0..=100).map(|i| i as f64 / 10.0).collect();
        let x = DataView::new(&data, 1);
        let g = PrincipalGraph::from_points(&[vec![2.0], vec![8.0]], vec![[0, 1]], ElasticParams::default()).unwrap();
        let e = extend_leaves(x, &g).unwrap();
        assert!(e.node(0)[0] < 0.0 && e.node(1)[0] > 10.0);
        for &v in &data {
            let p = project_point(&[v], &e).unwrap();
            assert!(p.epsilon > 0.0 && p.epsilon < 1.0);
        }
        let again = extend_leaves(x, &e).unwrap();
        assert_eq!(again, e);
    }
}
