//! Numeric quantification of discrete variables.
//!
//! Ordinal and binary columns are mapped to latent standard-normal quantiles
//! of their cumulative level frequencies; ordinal columns can then be
//! rescaled jointly to maximize the sum of squared pairwise correlations
//! under a monotonicity constraint. Categorical columns are dummy coded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{column_scale, MixedDataTable, NumericMatrix, VariableKind};
use crate::stats::special::normal_quantile;
use crate::{Error, Result};

/// Level values of one discrete column after univariate quantification.
/// Only observed levels carry a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantifiedVariable {
    pub column: String,
    pub level_values: BTreeMap<usize, f64>,
    pub level_probs: BTreeMap<usize, f64>,
}

impl QuantifiedVariable {
    pub fn value(&self, level: usize) -> Option<f64> {
        self.level_values.get(&level).copied()
    }
}

/// Quantifies an ordered discrete variable from its per-level counts:
/// `x_i = Phi^-1(sum_{j<i} p_j + p_i / 2)` with `p_i = n_i / N`.
pub fn quantify_ordinal_univariate(column: &str, counts: &[usize]) -> Result<QuantifiedVariable> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyColumn(column.to_string()));
    }
    let n = total as f64;
    let mut level_values = BTreeMap::new();
    let mut level_probs = BTreeMap::new();
    let mut cumulative = 0.0;
    for (level, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let p = count as f64 / n;
        level_values.insert(level, normal_quantile(cumulative + 0.5 * p));
        level_probs.insert(level, p);
        cumulative += p;
    }
    Ok(QuantifiedVariable {
        column: column.to_string(),
        level_values,
        level_probs,
    })
}

fn level_counts(table: &MixedDataTable, col: usize) -> Vec<usize> {
    let mut counts = vec![0usize; table.levels(col).len()];
    for r in 0..table.n_rows() {
        if let Some(level) = table.level_index(r, col) {
            counts[level] += 1;
        }
    }
    counts
}

/// Univariate quantification of a binary or ordinal column of a table.
pub fn quantify_column(table: &MixedDataTable, col: usize) -> Result<QuantifiedVariable> {
    let var = &table.schema()[col];
    if !var.kind.is_ordered_discrete() {
        return Err(Error::WrongKind {
            column: var.name.clone(),
            expected: "binary or ordinal",
            actual: var.kind.as_str(),
        });
    }
    quantify_ordinal_univariate(&var.name, &level_counts(table, col))
}

/// One binary column per category of a categorical column. Missing rows are
/// missing in every emitted column.
pub fn encode_categorical(table: &MixedDataTable, column: &str) -> Result<NumericMatrix> {
    let col = table
        .column_index(column)
        .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
    let var = &table.schema()[col];
    if var.kind != VariableKind::Categorical {
        return Err(Error::WrongKind {
            column: column.to_string(),
            expected: "categorical",
            actual: var.kind.as_str(),
        });
    }
    let levels = table.levels(col);
    let rows = table.n_rows();
    let cols = levels.len();
    let mut values = vec![0.0; rows * cols];
    let mut missing = vec![false; rows * cols];
    for r in 0..rows {
        match table.level_index(r, col) {
            Some(level) => values[r * cols + level] = 1.0,
            None => missing[r * cols..(r + 1) * cols].fill(true),
        }
    }
    let names = levels.iter().map(|l| format!("{column}_{l}")).collect();
    NumericMatrix::new(rows, cols, values, missing, names)
}

/// Provenance of one column of the quantified matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    /// Schema column this numeric column was derived from.
    pub source: String,
    pub kind: VariableKind,
    /// Level tokens that received a value (observed levels, in level order).
    #[serde(default)]
    pub levels: Vec<String>,
    /// Numeric value of each entry of `levels`.
    #[serde(default)]
    pub level_values: Vec<f64>,
}

impl ColumnInfo {
    pub fn is_discrete(&self) -> bool {
        self.kind != VariableKind::Continuous
    }

    /// Dummy columns of one categorical variable share a group name.
    pub fn exclusive_group(&self) -> Option<&str> {
        (self.kind == VariableKind::Categorical).then_some(self.source.as_str())
    }
}

/// Mixed table turned into reals: continuous columns as z-scores, binary and
/// ordinal columns through [`quantify_ordinal_univariate`], categorical
/// columns dummy coded with 0/1.
#[derive(Debug, Clone)]
pub struct QuantifiedTable {
    pub matrix: NumericMatrix,
    pub columns: Vec<ColumnInfo>,
}

impl QuantifiedTable {
    /// Quantification maps `{column: {level token: value}}` for audit.
    pub fn maps(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        self.columns
            .iter()
            .filter(|c| c.is_discrete())
            .map(|c| {
                let map = c
                    .levels
                    .iter()
                    .cloned()
                    .zip(c.level_values.iter().copied())
                    .collect();
                (c.name.clone(), map)
            })
            .collect()
    }
}

pub fn quantify_table(table: &MixedDataTable) -> Result<QuantifiedTable> {
    let rows = table.n_rows();
    let mut blocks: Vec<NumericMatrix> = Vec::new();
    let mut columns = Vec::new();
    let all_codes = table.to_codes();
    for (c, var) in table.schema().iter().enumerate() {
        match var.kind {
            VariableKind::Continuous => {
                let codes = all_codes.select_cols(&[c]);
                let scale = column_scale(&codes, 0)?;
                let values = codes
                    .values()
                    .iter()
                    .map(|v| (v - scale.mean) / scale.sd)
                    .collect();
                blocks.push(NumericMatrix::with_nan_as_missing(
                    rows,
                    1,
                    values,
                    vec![var.name.clone()],
                ));
                columns.push(ColumnInfo {
                    name: var.name.clone(),
                    source: var.name.clone(),
                    kind: var.kind,
                    levels: vec![],
                    level_values: vec![],
                });
            }
            VariableKind::Binary | VariableKind::Ordinal => {
                let q = quantify_column(table, c)?;
                let values = (0..rows)
                    .map(|r| {
                        table
                            .level_index(r, c)
                            .and_then(|l| q.value(l))
                            .unwrap_or(f64::NAN)
                    })
                    .collect();
                blocks.push(NumericMatrix::with_nan_as_missing(
                    rows,
                    1,
                    values,
                    vec![var.name.clone()],
                ));
                let all_levels = table.levels(c);
                columns.push(ColumnInfo {
                    name: var.name.clone(),
                    source: var.name.clone(),
                    kind: var.kind,
                    levels: q.level_values.keys().map(|&l| all_levels[l].clone()).collect(),
                    level_values: q.level_values.values().copied().collect(),
                });
            }
            VariableKind::Categorical => {
                let dummies = encode_categorical(table, &var.name)?;
                for name in dummies.column_names() {
                    columns.push(ColumnInfo {
                        name: name.clone(),
                        source: var.name.clone(),
                        kind: VariableKind::Categorical,
                        levels: vec!["0".into(), "1".into()],
                        level_values: vec![0.0, 1.0],
                    });
                }
                blocks.push(dummies);
            }
        }
    }
    let mut matrix = NumericMatrix::new(rows, 0, vec![], vec![], vec![])?;
    for block in &blocks {
        matrix = matrix.hstack(block)?;
    }
    Ok(QuantifiedTable { matrix, columns })
}

/// An ordinal column taking part in optimal scaling. Each cell is assigned
/// to the level whose current value is nearest.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalColumn {
    pub index: usize,
    /// Current level values in level order (non-decreasing).
    pub level_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScalingResult {
    /// Final level values per ordinal column (same order as the input
    /// columns), on the standardized scale.
    pub level_values: Vec<Vec<f64>>,
    /// Sum of squared pairwise correlations before the first sweep and
    /// after each sweep.
    pub trace: Vec<f64>,
    /// All columns standardized, ordinal columns replaced by their scaled
    /// values.
    pub matrix: NumericMatrix,
    pub converged: bool,
}

/// Weighted pool-adjacent-violators: the non-decreasing sequence closest to
/// `values` in weighted least squares.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (weighted mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let (v2, w2, l2) = blocks.pop().unwrap();
            let (v1, w1, l1) = blocks.pop().unwrap();
            let w = w1 + w2;
            let v = if w > 0.0 { (v1 * w1 + v2 * w2) / w } else { 0.5 * (v1 + v2) };
            blocks.push((v, w, l1 + l2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, _, len)| std::iter::repeat_n(v, len))
        .collect()
}

fn standardize_in_place(col: &mut [f64]) -> Option<()> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if !(sd > 1e-12) {
        return None;
    }
    for v in col.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Some(())
}

fn squared_correlation_sum(cols: &[Vec<f64>]) -> f64 {
    let denom = (cols[0].len() - 1) as f64;
    let mut total = 0.0;
    for j in 0..cols.len() {
        for k in j + 1..cols.len() {
            let r: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum::<f64>() / denom;
            total += r * r;
        }
    }
    total
}

/// Sum of squared correlations between `candidate` (as column j) and all
/// other columns.
fn column_contribution(cols: &[Vec<f64>], j: usize, candidate: &[f64]) -> f64 {
    let denom = (candidate.len() - 1) as f64;
    cols.iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, col)| {
            let r = candidate.iter().zip(col).map(|(a, b)| a * b).sum::<f64>() / denom;
            r * r
        })
        .sum()
}

fn nearest_level(levels: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, &l) in levels.iter().enumerate() {
        if (l - v).abs() < (levels[best] - v).abs() {
            best = i;
        }
    }
    best
}

/// Optimal scaling of ordinal columns.
///
/// Every sweep visits the ordinal columns in the given order. For column j
/// the objective restricted to j is a convex quadratic form, so moving to
/// the normalized projection of its gradient `sum_k r_jk z_k` onto the cone
/// of level-constant, monotone, centred vectors never decreases it. The
/// projection is level means followed by weighted PAVA.
pub fn optimal_scale(
    m: &NumericMatrix,
    ordinal_columns: &[OrdinalColumn],
    max_iter: usize,
    tol: f64,
) -> Result<ScalingResult> {
    m.require_complete()?;
    if ordinal_columns.is_empty() {
        return Err(Error::InvalidArgument("no ordinal columns to scale".into()));
    }
    if m.rows() < 3 {
        return Err(Error::InsufficientData("optimal scaling needs at least 3 rows".into()));
    }
    let n = m.rows();
    let mut cols: Vec<Vec<f64>> = (0..m.cols()).map(|c| m.column(c)).collect();
    for (c, col) in cols.iter_mut().enumerate() {
        standardize_in_place(col).ok_or_else(|| Error::ConstantColumn(m.column_names()[c].clone()))?;
    }

    // level membership is fixed by the input values
    let memberships: Vec<Vec<usize>> = ordinal_columns
        .iter()
        .map(|oc| {
            let raw = m.column(oc.index);
            raw.iter().map(|&v| nearest_level(&oc.level_values, v)).collect()
        })
        .collect();
    let mut level_values: Vec<Vec<f64>> = ordinal_columns
        .iter()
        .zip(&memberships)
        .map(|(oc, member)| {
            // standardized value of every level that occurs
            let mut vals = vec![f64::NAN; oc.level_values.len()];
            for (i, &l) in member.iter().enumerate() {
                vals[l] = cols[oc.index][i];
            }
            vals
        })
        .collect();

    let mut trace = vec![squared_correlation_sum(&cols)];
    let mut converged = false;
    let denom = (n - 1) as f64;
    for _ in 0..max_iter {
        for (o, oc) in ordinal_columns.iter().enumerate() {
            let j = oc.index;
            let member = &memberships[o];
            let n_levels = oc.level_values.len();
            let mut gradient = vec![0.0; n];
            for k in 0..cols.len() {
                if k == j {
                    continue;
                }
                let r: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum::<f64>() / denom;
                for (g, z) in gradient.iter_mut().zip(&cols[k]) {
                    *g += r * z;
                }
            }
            let mut sums = vec![0.0; n_levels];
            let mut counts = vec![0.0; n_levels];
            for (&l, &g) in member.iter().zip(&gradient) {
                sums[l] += g;
                counts[l] += 1.0;
            }
            let occupied: Vec<usize> = (0..n_levels).filter(|&l| counts[l] > 0.0).collect();
            let means: Vec<f64> = occupied.iter().map(|&l| sums[l] / counts[l]).collect();
            let weights: Vec<f64> = occupied.iter().map(|&l| counts[l]).collect();
            let fitted = pava(&means, &weights);
            let mut per_level = vec![f64::NAN; n_levels];
            for (&l, &v) in occupied.iter().zip(&fitted) {
                per_level[l] = v;
            }
            let mut candidate: Vec<f64> = member.iter().map(|&l| per_level[l]).collect();
            if standardize_in_place(&mut candidate).is_some() {
                // the step is ascent in exact arithmetic; keep round-off out
                let before = column_contribution(&cols, j, &cols[j]);
                if column_contribution(&cols, j, &candidate) >= before {
                    cols[j] = candidate;
                }
            }
            for (i, &l) in member.iter().enumerate() {
                level_values[o][l] = cols[j][i];
            }
        }
        let objective = squared_correlation_sum(&cols);
        let previous = *trace.last().unwrap();
        trace.push(objective.max(previous));
        if objective - previous < tol {
            converged = true;
            break;
        }
    }

    let mut values = Vec::with_capacity(n * cols.len());
    for r in 0..n {
        for col in &cols {
            values.push(col[r]);
        }
    }
    let matrix = NumericMatrix::new(
        n,
        cols.len(),
        values,
        vec![false; n * cols.len()],
        m.column_names().to_vec(),
    )?;
    Ok(ScalingResult {
        level_values,
        trace,
        matrix,
        converged,
    })
}
