#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clintraj::elpigraph::{ElasticParams, PrincipalGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Three arms of equal length leaving the origin at 120 degrees, with
/// isotropic Gaussian noise. Row-major, 2 columns.
pub fn y_cloud(seed: u64, per_arm: usize, noise: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise).unwrap();
    let mut v = Vec::with_capacity(per_arm * 6);
    for a in 0..3 {
        let angle = std::f64::consts::FRAC_PI_2 + a as f64 * 2.0 * std::f64::consts::PI / 3.0;
        let (s, c) = angle.sin_cos();
        for _ in 0..per_arm {
            let t: f64 = rng.random_range(0.0..1.0);
            v.push(t * c + n.sample(&mut rng));
            v.push(t * s + n.sample(&mut rng));
        }
    }
    v
}

/// Three arms of unequal length and density, so no two grammar
/// candidates tie. Row-major, 2 columns.
pub fn skewed_cloud(seed: u64, noise: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise).unwrap();
    let arms = [(90.0f64, 1.0, 40), (205.0, 0.6, 25), (330.0, 0.35, 15)];
    let mut v = Vec::new();
    for (deg, len, count) in arms {
        let (s, c) = deg.to_radians().sin_cos();
        for _ in 0..count {
            let t: f64 = rng.random_range(0.0..len);
            v.push(t * c + n.sample(&mut rng));
            v.push(t * s + n.sample(&mut rng));
        }
    }
    v
}

/// Random tree: node k > 0 attaches to a uniformly chosen earlier node.
pub fn random_tree(rng: &mut impl Rng, n_nodes: usize, dim: usize, params: ElasticParams) -> PrincipalGraph {
    let nodes: Vec<Vec<f64>> = (0..n_nodes)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let edges = (1..n_nodes).map(|k| [rng.random_range(0..k), k]).collect();
    PrincipalGraph::from_points(&nodes, edges, params).unwrap()
}

pub fn random_points(rng: &mut impl Rng, rows: usize, dim: usize) -> Vec<f64> {
    (0..rows * dim).map(|_| rng.random_range(-3.0..3.0)).collect()
}

/// Energy of a graph for a given assignment of points to nodes, written
/// out term by term.
pub fn reference_energy(data: &[f64], dim: usize, assign: &[usize], nodes: &[f64], g: &PrincipalGraph) -> f64 {
    let n = assign.len();
    let node = |k: usize| &nodes[k * dim..(k + 1) * dim];
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let r2 = g.params.r0 * g.params.r0;
    let mut msd = 0.0;
    for i in 0..n {
        msd += d2(&data[i * dim..(i + 1) * dim], node(assign[i])).min(r2);
    }
    msd /= n as f64;
    let mut deg = vec![0usize; g.n_nodes()];
    for e in g.edges() {
        deg[e[0]] += 1;
        deg[e[1]] += 1;
    }
    let mut stretch = 0.0;
    for e in g.edges() {
        let k = deg[e[0]].max(deg[e[1]]).max(2);
        let lam = g.params.lambda + g.params.alpha * (k - 2) as f64;
        stretch += lam * d2(node(e[0]), node(e[1]));
    }
    let mut bend = 0.0;
    for c in 0..g.n_nodes() {
        let nbrs: Vec<usize> = g
            .edges()
            .iter()
            .filter_map(|e| if e[0] == c { Some(e[1]) } else if e[1] == c { Some(e[0]) } else { None })
            .collect();
        if nbrs.len() < 2 {
            continue;
        }
        for t in 0..dim {
            let mean = nbrs.iter().map(|&v| node(v)[t]).sum::<f64>() / nbrs.len() as f64;
            bend += (node(c)[t] - mean).powi(2);
        }
    }
    msd + stretch + g.params.mu * bend
}

/// Writes a synthetic mixed-type study (CSV, schema, config) into `dir`
/// and returns the config path. The latent structure is a trunk that
/// splits into two branches; `outcome` carries competing events whose
/// risk grows along the branches.
pub fn write_study(dir: &Path, seed: u64, rows: usize) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).unwrap();
    let obs = Normal::new(0.0, 0.2).unwrap();
    let w: Vec<[f64; 2]> = (0..8).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let mut csv = String::from("c0,c1,c2,c3,c4,c5,c6,c7,grade,sex,kind,outcome\n");
    for _ in 0..rows {
        let t: f64 = rng.random_range(0.0..3.0);
        let up = rng.random_bool(0.5);
        let (a, b) = if t < 1.0 {
            (t, 0.0)
        } else {
            let s = 0.7 * (t - 1.0);
            (1.0 + s, if up { s } else { -s })
        };
        let a = a + noise.sample(&mut rng);
        let b = b + noise.sample(&mut rng);
        let drop = rng.random_range(0..40usize);
        for (k, wk) in w.iter().enumerate() {
            if k == drop {
                csv.push(',');
            } else {
                let _ = write!(csv, "{:.4},", wk[0] * a + wk[1] * b + obs.sample(&mut rng));
            }
        }
        let grade = (t as usize).min(3);
        let sex = rng.random_range(0..2);
        let kind = if b > 0.3 { "a" } else if b < -0.3 { "b" } else { "c" };
        let outcome = if rng.random_range(0.0..1.0) > t / 4.0 {
            "0"
        } else if up {
            "1"
        } else {
            "2"
        };
        let _ = writeln!(csv, "{grade},{sex},{kind},{outcome}");
    }
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    let schema = r#"[
  {"name": "c0", "kind": "continuous"}, {"name": "c1", "kind": "continuous"},
  {"name": "c2", "kind": "continuous"}, {"name": "c3", "kind": "continuous"},
  {"name": "c4", "kind": "continuous"}, {"name": "c5", "kind": "continuous"},
  {"name": "c6", "kind": "continuous"}, {"name": "c7", "kind": "continuous"},
  {"name": "grade", "kind": "ordinal", "levels": ["0", "1", "2", "3"]},
  {"name": "sex", "kind": "binary"},
  {"name": "kind", "kind": "categorical"},
  {"name": "outcome", "kind": "categorical"}
]
"#;
    std::fs::write(dir.join("schema.json"), schema).unwrap();
    let config = r#"{
  "data": "data.csv",
  "schema": "schema.json",
  "output_dir": "out",
  "outcome_columns": ["outcome"],
  "pca_components": 4,
  "elastic": {"lambda": 0.05, "mu": 0.1, "alpha": 0.01, "r0": null, "n_nodes_target": 16},
  "root": {"auto": {"column": "outcome", "class": "0"}},
  "survival": {"event_column": "outcome", "cox_covariates": ["c0", "c1"]},
  "layout": {"color_by": "outcome", "width_by": "c0"},
  "seed": 7
}
"#;
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    path
}

/// All regular files under `dir`, relative names sorted.
pub fn list_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}
