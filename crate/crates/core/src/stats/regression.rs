use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Num, NumericMatrix};
use crate::linalg::quantile;
use crate::treeanalysis::PseudotimeAssignment;
use crate::{Error, Result};

/// Samples in a fitted curve.
pub const GRID_POINTS: usize = 50;
/// Fewest points a trajectory needs before a regression is attempted.
pub const MIN_TRAJECTORY_POINTS: usize = 10;
const MIN_BANDWIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    Linear,
    GaussianKernel,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub variable: String,
    pub trajectory: Option<usize>,
    pub kind: RegressionKind,
    pub r_squared: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n_points: usize,
    pub converged: bool,
}

fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst <= 0.0 {
        return 0.0;
    }
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - sse / sst
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Silverman's rule of thumb with a floor of a quarter edge.
pub fn kernel_bandwidth(pt: &[f64]) -> f64 {
    let n = pt.len() as f64;
    if pt.len() < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = pt.iter().sum::<f64>() / n;
    let sd = (pt.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = pt.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(MIN_BANDWIDTH)
}

fn nadaraya_watson(pt: &[f64], y: &[f64], h: f64, at: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in pt.iter().zip(y) {
        let w = (-0.5 * ((at - t) / h).powi(2)).exp();
        num += w * v;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        y.iter().sum::<f64>() / y.len() as f64
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// IRLS for a one-feature logistic model with a ridge penalty on the
/// slope. Returns `(intercept, slope, converged)`.
fn irls(x: &[f64], y: &[f64], ridge: f64) -> (f64, f64, bool) {
    let (mut b0, mut b1) = (0.0, 0.0);
    for _ in 0..100 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, -ridge * b1, 0.0, 0.0, ridge);
        for (xi, yi) in x.iter().zip(y) {
            let p = sigmoid(b0 + b1 * xi);
            let w = (p * (1.0 - p)).max(1e-12);
            g0 += yi - p;
            g1 += (yi - p) * xi;
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det.abs() > 1e-300) {
            return (b0, b1, false);
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        b0 += d0;
        b1 += d1;
        if !(b0.is_finite() && b1.is_finite()) {
            return (0.0, 0.0, false);
        }
        if d0.abs().max(d1.abs()) < 1e-10 {
            return (b0, b1, true);
        }
    }
    (b0, b1, false)
}

/// Regresses `y` on pseudotime. NaN values of `y` are skipped. Logistic
/// fits need a variable with exactly two distinct values; the larger one
/// is the positive class and its probability is returned on the grid.
pub fn regress_on_pseudotime(pt: &[f64], y: &[f64], kind: RegressionKind) -> Result<RegressionFit> {
    if pt.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: pt.len(),
            found: y.len(),
        });
    }
    let (t, mut v): (Vec<f64>, Vec<f64>) = pt
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if t.len() < MIN_TRAJECTORY_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points on the trajectory, need {MIN_TRAJECTORY_POINTS}",
            t.len()
        )));
    }
    let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let n = t.len() as f64;
    let mut converged = true;
    let (r2, values) = match kind {
        RegressionKind::Linear => {
            let mt = t.iter().sum::<f64>() / n;
            let mv = v.iter().sum::<f64>() / n;
            let stt: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
            let stv: f64 = t.iter().zip(&v).map(|(a, b)| (a - mt) * (b - mv)).sum();
            let slope = if stt > 0.0 { stv / stt } else { 0.0 };
            let icept = mv - slope * mt;
            let pred: Vec<f64> = t.iter().map(|a| icept + slope * a).collect();
            (r_squared(&v, &pred), grid.iter().map(|a| icept + slope * a).collect())
        }
        RegressionKind::GaussianKernel => {
            let h = kernel_bandwidth(&t);
            let pred: Vec<f64> = t.iter().map(|&a| nadaraya_watson(&t, &v, h, a)).collect();
            (
                r_squared(&v, &pred),
                grid.iter().map(|&a| nadaraya_watson(&t, &v, h, a)).collect(),
            )
        }
        RegressionKind::Logistic => {
            let mut distinct = v.clone();
            distinct.sort_by(|a, b| a.total_cmp(b));
            distinct.dedup();
            if distinct.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "logistic regression needs a binary variable, found {} distinct values",
                    distinct.len()
                )));
            }
            let positive = distinct[1];
            v.iter_mut().for_each(|a| *a = if *a == positive { 1.0 } else { 0.0 });
            let mt = t.iter().sum::<f64>() / n;
            let sd = (t.iter().map(|a| (a - mt).powi(2)).sum::<f64>() / n).sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            let z: Vec<f64> = t.iter().map(|a| (a - mt) / scale).collect();
            let (mut b0, mut b1, ok) = irls(&z, &v, 1e-6);
            if !ok || b1.abs() > 30.0 {
                log::warn!("logistic fit did not converge (separation); refitting with ridge damping");
                let (c0, c1, ok2) = irls(&z, &v, 1.0);
                b0 = c0;
                b1 = c1;
                converged = false;
                if !ok2 {
                    log::warn!("damped logistic fit did not converge either");
                }
            }
            let prob = |a: f64| sigmoid(b0 + b1 * (a - mt) / scale);
            let fitted: Vec<f64> = t.iter().map(|&a| prob(a)).collect();
            (pearson(&v, &fitted).powi(2), grid.iter().map(|&a| prob(a)).collect())
        }
    };
    Ok(RegressionFit {
        variable: String::new(),
        trajectory: None,
        kind,
        r_squared: r2.min(1.0),
        grid,
        values,
        n_points: t.len(),
        converged,
    })
}

/// R^2 of every variable against pseudotime on every trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub variables: Vec<String>,
    pub trajectories: Vec<usize>,
    pub threshold: f64,
    /// `r_squared[v][t]`; NaN where no fit was possible.
    pub r_squared: Vec<Vec<f64>>,
    pub fits: Vec<RegressionFit>,
}

impl ScreenResult {
    pub fn passes(&self, v: usize, t: usize) -> bool {
        self.r_squared[v][t] > self.threshold
    }

    /// Variables passing the threshold on at least one trajectory.
    pub fn passing_variables(&self) -> Vec<&str> {
        (0..self.variables.len())
            .filter(|&v| (0..self.trajectories.len()).any(|t| self.passes(v, t)))
            .map(|v| self.variables[v].as_str())
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<String> = self.trajectories.iter().map(|t| format!("trajectory_{t}")).collect();
        writeln!(w, "variable,{}", header.join(",")).map_err(io)?;
        for (name, row) in self.variables.iter().zip(&self.r_squared) {
            let cells: Vec<String> = row
                .iter()
                .map(|r| if r.is_nan() { String::new() } else { Num(*r).to_string() })
                .collect();
            writeln!(w, "{name},{}", cells.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Fits every column of `x` against pseudotime on every trajectory of
/// `assignment`, with one regression kind per column.
pub fn screen_trajectory_associations(
    assignment: &PseudotimeAssignment,
    x: &NumericMatrix,
    kinds: &[RegressionKind],
    threshold: f64,
) -> Result<ScreenResult> {
    if x.rows() != assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: assignment.len(),
            found: x.rows(),
        });
    }
    if kinds.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            found: kinds.len(),
        });
    }
    let traj_ids: Vec<usize> = assignment.trajectories.iter().map(|t| t.id).collect();
    let members: Vec<Vec<usize>> = traj_ids.iter().map(|&id| assignment.members(id)).collect();
    let jobs: Vec<(usize, usize)> = (0..x.cols())
        .flat_map(|v| (0..traj_ids.len()).map(move |t| (v, t)))
        .collect();
    let fits: Vec<Option<RegressionFit>> = jobs
        .par_iter()
        .map(|&(v, t)| {
            let pt: Vec<f64> = members[t].iter().map(|&i| assignment.pseudotime[i]).collect();
            let y: Vec<f64> = members[t].iter().map(|&i| x.get(i, v)).collect();
            match regress_on_pseudotime(&pt, &y, kinds[v]) {
                Ok(mut fit) => {
                    fit.variable = x.column_names()[v].clone();
                    fit.trajectory = Some(traj_ids[t]);
                    Some(fit)
                }
                Err(e) => {
                    log::debug!("skipping {} on trajectory {}: {e}", x.column_names()[v], traj_ids[t]);
                    None
                }
            }
        })
        .collect();
    let mut r2 = vec![vec![f64::NAN; traj_ids.len()]; x.cols()];
    for (&(v, t), f) in jobs.iter().zip(&fits) {
        if let Some(f) = f {
            r2[v][t] = f.r_squared;
        }
    }
    Ok(ScreenResult {
        variables: x.column_names().to_vec(),
        trajectories: traj_ids,
        threshold,
        r_squared: r2,
        fits: fits.into_iter().flatten().collect(),
    })
}
