//! Planar drawings of principal trees and of the data around them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elpigraph::{project_point, DataView, PartitionVector, PrincipalGraph};
use crate::linalg::{median, symmetric_eigen_desc};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphLayout {
    pub node_xy: Vec<[f64; 2]>,
    /// Stress after initialization and after every accepted step.
    pub stress_trace: Vec<f64>,
}

fn graph_distances(g: &PrincipalGraph) -> Vec<Vec<f64>> {
    (0..g.n_nodes())
        .map(|s| g.bfs_distances(s).into_iter().map(|d| d as f64).collect())
        .collect()
}

fn stress(xy: &[[f64; 2]], d: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..xy.len() {
        for j in i + 1..xy.len() {
            let r = ((xy[i][0] - xy[j][0]).powi(2) + (xy[i][1] - xy[j][1]).powi(2)).sqrt();
            s += (r - d[i][j]).powi(2) / (d[i][j] * d[i][j]);
        }
    }
    s
}

fn stress_gradient(xy: &[[f64; 2]], d: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; xy.len()];
    for i in 0..xy.len() {
        for j in i + 1..xy.len() {
            let dx = xy[i][0] - xy[j][0];
            let dy = xy[i][1] - xy[j][1];
            let r = (dx * dx + dy * dy).sqrt().max(1e-12);
            let c = 2.0 * (r - d[i][j]) / (d[i][j] * d[i][j] * r);
            g[i][0] += c * dx;
            g[i][1] += c * dy;
            g[j][0] -= c * dx;
            g[j][1] -= c * dy;
        }
    }
    g
}

/// Classical multidimensional scaling of the graph distances.
fn classical_mds(d: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = d.len();
    let sq = DMatrix::from_fn(n, n, |i, j| d[i][j] * d[i][j]);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let total = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + total));
    let (vals, vecs) = symmetric_eigen_desc(&b);
    (0..n)
        .map(|i| {
            let mut p = [0.0; 2];
            for k in 0..2.min(n) {
                p[k] = vecs[(i, k)] * vals[k].max(0.0).sqrt();
            }
            p
        })
        .collect()
}

/// Kamada-Kawai layout: stress over graph distances, initialized by
/// classical scaling and minimized by gradient descent with backtracking.
/// The seed only perturbs nodes that the initialization places on top of
/// each other.
pub fn layout_graph(g: &PrincipalGraph, seed: u64) -> Result<GraphLayout> {
    if g.n_nodes() == 0 {
        return Err(Error::InvalidArgument("graph has no nodes".into()));
    }
    if !g.is_connected() {
        return Err(Error::InvalidArgument("layout needs a connected graph".into()));
    }
    let n = g.n_nodes();
    if n == 1 {
        return Ok(GraphLayout {
            node_xy: vec![[0.0, 0.0]],
            stress_trace: vec![0.0],
        });
    }
    let d = graph_distances(g);
    let mut xy = classical_mds(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        for j in 0..i {
            if (xy[i][0] - xy[j][0]).abs() < 1e-9 && (xy[i][1] - xy[j][1]).abs() < 1e-9 {
                xy[i][0] += rng.random_range(-0.05..0.05);
                xy[i][1] += rng.random_range(-0.05..0.05);
            }
        }
    }
    let mut current = stress(&xy, &d);
    let mut trace = vec![current];
    let mut step = 0.1;
    for _ in 0..5000 {
        let grad = stress_gradient(&xy, &d);
        let gnorm2: f64 = grad.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
        if gnorm2 < 1e-20 {
            break;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..50 {
            let cand: Vec<[f64; 2]> = xy
                .iter()
                .zip(&grad)
                .map(|(p, gr)| [p[0] - t * gr[0], p[1] - t * gr[1]])
                .collect();
            let s = stress(&cand, &d);
            if s <= current - 1e-4 * t * gnorm2 {
                accepted = Some((cand, s));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, s)) = accepted else { break };
        let improvement = current - s;
        xy = cand;
        current = s;
        trace.push(s);
        step = (t * 2.0).min(1.0);
        if improvement <= 1e-12 * current.max(1e-12) {
            break;
        }
    }
    Ok(GraphLayout {
        node_xy: xy,
        stress_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLayout {
    pub point_xy: Vec<[f64; 2]>,
    /// +1 or -1: side of the drawn edge.
    pub sides: Vec<i8>,
    pub edges: Vec<usize>,
    pub scattering: f64,
}

fn drawn_edge_lengths(g: &PrincipalGraph, node_xy: &[[f64; 2]]) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|e| {
            let (a, b) = (node_xy[e[0]], node_xy[e[1]]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .collect()
}

/// Scattering factor that puts the median offset at a quarter of the
/// median drawn edge length.
pub fn default_scattering(x: DataView<'_>, g: &PrincipalGraph, node_xy: &[[f64; 2]]) -> Result<f64> {
    if x.rows == 0 || g.n_edges() == 0 {
        return Ok(1.0);
    }
    let residuals: Vec<f64> = (0..x.rows)
        .map(|i| project_point(x.row(i), g).map(|p| p.squared_distance.sqrt()))
        .collect::<Result<_>>()?;
    let d_med = median(&residuals);
    let l_med = median(&drawn_edge_lengths(g, node_xy));
    Ok(if d_med > 0.0 { 0.25 * l_med / d_med } else { 1.0 })
}

/// Places every point beside its projection on the drawn tree, offset
/// perpendicular to the edge by `s` times its residual distance.
pub fn layout_points(x: DataView<'_>, g: &PrincipalGraph, node_xy: &[[f64; 2]], s: f64, seed: u64) -> Result<PointLayout> {
    if node_xy.len() != g.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: g.n_nodes(),
            found: node_xy.len(),
        });
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument("scattering must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PointLayout {
        point_xy: Vec::with_capacity(x.rows),
        sides: Vec::with_capacity(x.rows),
        edges: Vec::with_capacity(x.rows),
        scattering: s,
    };
    for i in 0..x.rows {
        let p = project_point(x.row(i), g)?;
        let [ea, eb] = g.edges()[p.edge];
        let (a, b) = (node_xy[ea], node_xy[eb]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dy * dy).sqrt();
        let normal = if len > 0.0 { [-dy / len, dx / len] } else { [0.0, 1.0] };
        let side: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
        let off = side as f64 * s * p.squared_distance.sqrt();
        out.point_xy.push([
            a[0] + p.epsilon * dx + off * normal[0],
            a[1] + p.epsilon * dy + off * normal[1],
        ]);
        out.sides.push(side);
        out.edges.push(p.edge);
    }
    Ok(out)
}

/// Edge widths from the mean of `values` over points assigned to either
/// endpoint, rescaled to `[min_width, max_width]`. Edges without data get
/// `min_width`; a constant variable gives equal widths.
pub fn edge_widths(g: &PrincipalGraph, values: &[f64], partition: &PartitionVector, min_width: f64, max_width: f64) -> Result<Vec<f64>> {
    if values.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: partition.len(),
            found: values.len(),
        });
    }
    let mut sum = vec![0.0; g.n_nodes()];
    let mut cnt = vec![0.0; g.n_nodes()];
    for (&j, &v) in partition.nearest.iter().zip(values) {
        if v.is_finite() {
            sum[j] += v;
            cnt[j] += 1.0;
        }
    }
    let edge_mean: Vec<Option<f64>> = g
        .edges()
        .iter()
        .map(|e| {
            let c = cnt[e[0]] + cnt[e[1]];
            (c > 0.0).then(|| (sum[e[0]] + sum[e[1]]) / c)
        })
        .collect();
    let present: Vec<f64> = edge_mean.iter().flatten().copied().collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(edge_mean
        .iter()
        .map(|m| match m {
            Some(v) if hi > lo => min_width + (v - lo) / (hi - lo) * (max_width - min_width),
            _ => min_width,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeComposition {
    pub count: usize,
    pub fractions: BTreeMap<String, f64>,
}

/// Category proportions among the points nearest to each node.
pub fn node_composition(g: &PrincipalGraph, labels: &[String], partition: &PartitionVector) -> Result<Vec<NodeComposition>> {
    if labels.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: partition.len(),
            found: labels.len(),
        });
    }
    let mut counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); g.n_nodes()];
    for (&j, l) in partition.nearest.iter().zip(labels) {
        *counts[j].entry(l.clone()).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| {
            let total: usize = c.values().sum();
            NodeComposition {
                count: total,
                fractions: c.into_iter().map(|(k, v)| (k, v as f64 / total as f64)).collect(),
            }
        })
        .collect())
}

/// Everything needed to draw a tree with its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout2D {
    #[serde(rename = "nodes_xy")]
    pub node_xy: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
    #[serde(rename = "points_xy")]
    pub point_xy: Vec<[f64; 2]>,
    pub sides: Vec<i8>,
    pub scattering: f64,
    pub widths: Vec<f64>,
    pub compositions: Vec<NodeComposition>,
    /// Class of each point for coloring; empty draws all points alike.
    pub point_classes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub node_radius: f64,
    pub point_radius: f64,
    pub label_leaves: bool,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 800.0,
            height: 800.0,
            margin: 40.0,
            node_radius: 4.0,
            point_radius: 1.5,
            label_leaves: true,
        }
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Deterministic SVG drawing of a layout.
pub fn render_svg(layout: &Layout2D, style: &SvgStyle) -> String {
    let all = layout.node_xy.iter().chain(&layout.point_xy);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (style.width.min(style.height) - 2.0 * style.margin) / span;
    let tx = |p: &[f64; 2]| -> (f64, f64) {
        (
            style.margin + (p[0] - x0) * scale,
            style.height - style.margin - (p[1] - y0) * scale,
        )
    };

    let mut classes: Vec<&str> = layout.point_classes.iter().map(String::as_str).collect();
    for c in &layout.compositions {
        classes.extend(c.fractions.keys().map(String::as_str));
    }
    classes.sort_unstable();
    classes.dedup();
    let color = |c: &str| PALETTE[classes.iter().position(|k| *k == c).unwrap_or(0) % PALETTE.len()];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">
<rect width="100%" height="100%" fill="white"/>"#,
        style.width, style.height, style.width, style.height
    );
    s.push_str("<g id=\"points\">\n");
    for (i, p) in layout.point_xy.iter().enumerate() {
        let (x, y) = tx(p);
        let fill = layout.point_classes.get(i).map_or("#999999", |c| color(c));
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{x:.3}" cy="{y:.3}" r="{:.2}" fill="{fill}" fill-opacity="0.6"/>"#,
            style.point_radius
        );
    }
    s.push_str("</g>\n<g id=\"edges\">\n");
    for (k, e) in layout.edges.iter().enumerate() {
        let (ax, ay) = tx(&layout.node_xy[e[0]]);
        let (bx, by) = tx(&layout.node_xy[e[1]]);
        let w = layout.widths.get(k).copied().unwrap_or(2.0);
        let _ = writeln!(
            s,
            r#"<line class="edge" x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="black" stroke-width="{w:.3}"/>"#
        );
    }
    s.push_str("</g>\n<g id=\"nodes\">\n");
    let mut degree = vec![0usize; layout.node_xy.len()];
    for e in &layout.edges {
        degree[e[0]] += 1;
        degree[e[1]] += 1;
    }
    let max_count = layout.compositions.iter().map(|c| c.count).max().unwrap_or(0).max(1) as f64;
    for (v, p) in layout.node_xy.iter().enumerate() {
        let (cx, cy) = tx(p);
        let comp = layout.compositions.get(v).filter(|c| c.count > 0);
        let leaf = if degree[v] == 1 { " leaf" } else { "" };
        match comp {
            Some(c) => {
                let r = style.node_radius * (1.0 + 2.0 * (c.count as f64 / max_count).sqrt());
                let _ = writeln!(s, r#"<g class="node{leaf}" data-node="{v}">"#);
                if c.fractions.len() == 1 {
                    let k = c.fractions.keys().next().expect("one category");
                    let _ = writeln!(s, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{r:.3}" fill="{}"/>"#, color(k));
                } else {
                    let mut angle = -std::f64::consts::FRAC_PI_2;
                    for (k, f) in &c.fractions {
                        let sweep = f * std::f64::consts::TAU;
                        let (sx, sy) = (cx + r * angle.cos(), cy + r * angle.sin());
                        let end = angle + sweep;
                        let (ex, ey) = (cx + r * end.cos(), cy + r * end.sin());
                        let large = if sweep > std::f64::consts::PI { 1 } else { 0 };
                        let _ = writeln!(
                            s,
                            r#"<path d="M {cx:.3} {cy:.3} L {sx:.3} {sy:.3} A {r:.3} {r:.3} 0 {large} 1 {ex:.3} {ey:.3} Z" fill="{}"/>"#,
                            color(k)
                        );
                        angle = end;
                    }
                }
                s.push_str("</g>\n");
            }
            None => {
                let _ = writeln!(
                    s,
                    r#"<circle class="node{leaf}" data-node="{v}" cx="{cx:.3}" cy="{cy:.3}" r="{:.2}" fill="white" stroke="black"/>"#,
                    style.node_radius
                );
            }
        }
        if style.label_leaves && degree[v] == 1 {
            let _ = writeln!(
                s,
                r#"<text class="leaf-label" x="{:.3}" y="{:.3}" font-size="12" font-family="sans-serif">{v}</text>"#,
                cx + style.node_radius + 2.0,
                cy - style.node_radius - 2.0
            );
        }
    }
    s.push_str("</g>\n");
    if !classes.is_empty() {
        s.push_str("<g id=\"legend\">\n");
        for (i, c) in classes.iter().enumerate() {
            let y = style.margin / 2.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<rect x="8" y="{:.1}" width="10" height="10" fill="{}"/><text x="22" y="{:.1}" font-size="11" font-family="sans-serif">{}</text>"#,
                y,
                color(c),
                y + 9.0,
                escape(c)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}
