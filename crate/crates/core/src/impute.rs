//! Missingness filtering and SVD-based imputation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{estimate_dimension_pca, NumericMatrix};
use crate::linalg::{column_means, least_squares, scatter_matrix, symmetric_eigen_desc};
use crate::quantify::ColumnInfo;
use crate::{Error, Result};

/// Complete-row fraction below which `SvdComplete` warns.
pub const COMPLETE_FRACTION_WARNING: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputer {
    SvdComplete,
    SvdFull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessPolicy {
    pub delta_row: f64,
    pub delta_column: f64,
    /// Order of the SVD model; `None` picks the PCA intrinsic dimension of
    /// the complete rows.
    #[serde(default)]
    pub svd_order: Option<usize>,
    pub imputer: Imputer,
    pub round_discrete: bool,
}

impl Default for MissingnessPolicy {
    fn default() -> Self {
        MissingnessPolicy {
            delta_row: 0.2,
            delta_column: 0.3,
            svd_order: None,
            imputer: Imputer::SvdComplete,
            round_discrete: true,
        }
    }
}

impl MissingnessPolicy {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("delta_row", self.delta_row), ("delta_column", self.delta_column)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config {
                    field: format!("policy.{field}"),
                    reason: format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        if self.svd_order == Some(0) {
            return Err(Error::Config {
                field: "policy.svd_order".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub dropped_columns: Vec<usize>,
    pub dropped_column_names: Vec<String>,
    /// Row indices of the input that were dropped.
    pub dropped_rows: Vec<usize>,
    pub kept_columns: Vec<usize>,
    pub kept_rows: Vec<usize>,
    pub residual_missing_fraction: f64,
    pub complete_rows: usize,
}

/// Drops columns whose missing fraction exceeds `delta_column`, then rows
/// whose missing fraction over the remaining columns exceeds `delta_row`.
pub fn filter_missing(
    m: &NumericMatrix,
    policy: &MissingnessPolicy,
) -> Result<(NumericMatrix, FilterReport)> {
    policy.validate()?;
    let rows = m.rows();
    let cols = m.cols();
    let mut kept_columns = Vec::new();
    let mut dropped_columns = Vec::new();
    for c in 0..cols {
        let missing = (0..rows).filter(|&r| m.is_missing(r, c)).count();
        let frac = if rows == 0 { 0.0 } else { missing as f64 / rows as f64 };
        if frac > policy.delta_column {
            dropped_columns.push(c);
        } else {
            kept_columns.push(c);
        }
    }
    let mut kept_rows = Vec::new();
    let mut dropped_rows = Vec::new();
    for r in 0..rows {
        let missing = kept_columns.iter().filter(|&&c| m.is_missing(r, c)).count();
        let frac = if kept_columns.is_empty() {
            0.0
        } else {
            missing as f64 / kept_columns.len() as f64
        };
        if frac > policy.delta_row {
            dropped_rows.push(r);
        } else {
            kept_rows.push(r);
        }
    }
    if kept_rows.is_empty() || kept_columns.is_empty() {
        return Err(Error::InsufficientData(
            "missingness filter removed every row or column".into(),
        ));
    }
    let out = m.select(&kept_rows, &kept_columns);
    let report = FilterReport {
        dropped_column_names: dropped_columns
            .iter()
            .map(|&c| m.column_names()[c].clone())
            .collect(),
        dropped_columns,
        dropped_rows,
        kept_columns,
        kept_rows,
        residual_missing_fraction: out.missing_fraction(),
        complete_rows: out.complete_rows().len(),
    };
    Ok((out, report))
}

/// How imputed values of a column may be rounded.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnRole {
    Continuous,
    /// Legal values in increasing order.
    Discrete(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputeSchema {
    pub roles: Vec<ColumnRole>,
    /// Column groups (dummy codes of one categorical variable) in which at
    /// most one column takes its high value.
    pub exclusive_groups: Vec<Vec<usize>>,
}

impl ImputeSchema {
    pub fn all_continuous(cols: usize) -> Self {
        ImputeSchema {
            roles: vec![ColumnRole::Continuous; cols],
            exclusive_groups: vec![],
        }
    }

    pub fn from_columns(columns: &[ColumnInfo]) -> Self {
        let roles = columns
            .iter()
            .map(|c| {
                if c.is_discrete() && !c.level_values.is_empty() {
                    let mut levels = c.level_values.clone();
                    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ColumnRole::Discrete(levels)
                } else {
                    ColumnRole::Continuous
                }
            })
            .collect();
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, c) in columns.iter().enumerate() {
            if let Some(g) = c.exclusive_group() {
                match groups.iter_mut().find(|(name, _)| name == g) {
                    Some((_, members)) => members.push(i),
                    None => groups.push((g.to_string(), vec![i])),
                }
            }
        }
        ImputeSchema {
            roles,
            exclusive_groups: groups
                .into_iter()
                .map(|(_, m)| m)
                .filter(|m| m.len() > 1)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputedCell {
    pub row: usize,
    pub column: usize,
    pub imputed_value: f64,
    pub was_rounded: bool,
}

#[derive(Debug, Clone)]
pub struct Imputation {
    pub matrix: NumericMatrix,
    pub cells: Vec<ImputedCell>,
    pub svd_order: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Squared error on observed cells of each iterate's rank-k model
    /// (`SvdFull` only).
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Affine rank-k model: `x ~ mean + basis * a`.
struct LowRankModel {
    mean: Vec<f64>,
    basis: DMatrix<f64>,
}

impl LowRankModel {
    fn fit(values: &[f64], rows: usize, cols: usize, k: usize) -> Self {
        let mean = column_means(values, rows, cols);
        let scatter = scatter_matrix(values, rows, cols, &mean);
        let (_, vectors) = symmetric_eigen_desc(&scatter);
        let k = k.min(cols);
        LowRankModel {
            mean,
            basis: vectors.columns(0, k).into_owned(),
        }
    }

    /// Nearest point of the model hyperplane matching the observed
    /// coordinates in least squares.
    fn complete_row(&self, row: &[f64], missing: &[bool]) -> Vec<f64> {
        let observed: Vec<usize> = (0..row.len()).filter(|&c| !missing[c]).collect();
        let k = self.basis.ncols();
        let coef = if observed.is_empty() || k == 0 {
            DVector::zeros(k)
        } else {
            let a = DMatrix::from_fn(observed.len(), k, |i, j| self.basis[(observed[i], j)]);
            let b = DVector::from_iterator(
                observed.len(),
                observed.iter().map(|&c| row[c] - self.mean[c]),
            );
            least_squares(&a, &b)
        };
        (0..row.len())
            .map(|c| self.mean[c] + (0..k).map(|j| self.basis[(c, j)] * coef[j]).sum::<f64>())
            .collect()
    }

    fn reconstruct(&self, row: &[f64]) -> Vec<f64> {
        let k = self.basis.ncols();
        let coef: Vec<f64> = (0..k)
            .map(|j| {
                row.iter()
                    .enumerate()
                    .map(|(c, v)| (v - self.mean[c]) * self.basis[(c, j)])
                    .sum()
            })
            .collect();
        (0..row.len())
            .map(|c| self.mean[c] + (0..k).map(|j| self.basis[(c, j)] * coef[j]).sum::<f64>())
            .collect()
    }
}

fn nearest_value(levels: &[f64], v: f64) -> f64 {
    let mut best = levels[0];
    for &l in levels {
        if (l - v).abs() < (best - v).abs() {
            best = l;
        }
    }
    best
}

/// Fills the missing cells of every row from the model, then rounds.
fn project_and_round(
    m: &NumericMatrix,
    model: &LowRankModel,
    schema: &ImputeSchema,
    round: bool,
) -> (NumericMatrix, Vec<ImputedCell>) {
    let per_row: Vec<Vec<ImputedCell>> = (0..m.rows())
        .into_par_iter()
        .map(|r| {
            let missing = m.row_missing(r);
            if !missing.iter().any(|&x| x) {
                return vec![];
            }
            let filled = model.complete_row(m.row(r), missing);
            let mut cells: Vec<ImputedCell> = (0..m.cols())
                .filter(|&c| missing[c])
                .map(|c| ImputedCell {
                    row: r,
                    column: c,
                    imputed_value: filled[c],
                    was_rounded: false,
                })
                .collect();
            if round {
                round_row(m, r, &mut cells, schema);
            }
            cells
        })
        .collect();
    let mut out = m.clone();
    let cells: Vec<ImputedCell> = per_row.into_iter().flatten().collect();
    for cell in &cells {
        out.set(cell.row, cell.column, cell.imputed_value);
    }
    (out, cells)
}

fn round_row(m: &NumericMatrix, r: usize, cells: &mut [ImputedCell], schema: &ImputeSchema) {
    let mut in_group = vec![false; m.cols()];
    for group in &schema.exclusive_groups {
        let missing: Vec<usize> = group.iter().copied().filter(|&c| m.is_missing(r, c)).collect();
        if missing.is_empty() {
            continue;
        }
        for &c in group {
            in_group[c] = true;
        }
        let high_observed = group.iter().any(|&c| {
            !m.is_missing(r, c)
                && matches!(&schema.roles[c], ColumnRole::Discrete(l) if m.get(r, c) >= *l.last().unwrap())
        });
        let winner = if high_observed {
            None
        } else {
            missing
                .iter()
                .copied()
                .map(|c| (c, cells.iter().find(|x| x.column == c).unwrap().imputed_value))
                .fold(None, |best: Option<(usize, f64)>, (c, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((c, v)),
                })
                .map(|(c, _)| c)
        };
        for cell in cells.iter_mut().filter(|x| missing.contains(&x.column)) {
            if let ColumnRole::Discrete(levels) = &schema.roles[cell.column] {
                let target = if Some(cell.column) == winner {
                    *levels.last().unwrap()
                } else {
                    levels[0]
                };
                cell.was_rounded = target != cell.imputed_value;
                cell.imputed_value = target;
            }
        }
    }
    for cell in cells.iter_mut().filter(|x| !in_group[x.column]) {
        if let ColumnRole::Discrete(levels) = &schema.roles[cell.column] {
            if levels.is_empty() {
                continue;
            }
            let v = nearest_value(levels, cell.imputed_value);
            cell.was_rounded = v != cell.imputed_value;
            cell.imputed_value = v;
        }
    }
}

fn check_schema(m: &NumericMatrix, schema: &ImputeSchema) -> Result<()> {
    if schema.roles.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            found: schema.roles.len(),
        });
    }
    Ok(())
}

/// Default SVD order: PCA intrinsic dimension (ratio 10) of the complete
/// rows, falling back to 1 when fewer than two rows are complete.
pub fn default_svd_order(m: &NumericMatrix) -> usize {
    let complete = m.complete_rows();
    if complete.len() < 2 {
        return 1;
    }
    estimate_dimension_pca(&m.select_rows(&complete), 10.0)
        .unwrap_or(1)
        .max(1)
}

/// Fits a rank-k model on the complete rows and completes every other row
/// by projecting it onto the model hyperplane through its observed
/// coordinates.
pub fn impute_svd_complete(
    m: &NumericMatrix,
    k: usize,
    schema: &ImputeSchema,
    round_discrete: bool,
) -> Result<Imputation> {
    check_schema(m, schema)?;
    if k == 0 {
        return Err(Error::InvalidArgument("SVD order must be at least 1".into()));
    }
    let complete = m.complete_rows();
    if complete.len() < k + 1 {
        return Err(Error::InsufficientData(format!(
            "{} complete rows, SVD of order {k} needs at least {}",
            complete.len(),
            k + 1
        )));
    }
    let mut warnings = Vec::new();
    let frac = complete.len() as f64 / m.rows() as f64;
    if frac < COMPLETE_FRACTION_WARNING {
        let msg = format!(
            "only {:.1}% of rows are complete; SvdFull may be more reliable",
            100.0 * frac
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let sub = m.select_rows(&complete);
    let model = LowRankModel::fit(sub.values(), sub.rows(), sub.cols(), k);
    let (matrix, cells) = project_and_round(m, &model, schema, round_discrete);
    Ok(Imputation {
        matrix,
        cells,
        svd_order: k,
        converged: true,
        iterations: 0,
        objective_trace: vec![],
        warnings,
    })
}

/// Fill-and-refit rank-k SVD on the whole matrix, followed by the same
/// projection and rounding as [`impute_svd_complete`].
pub fn impute_svd_full(
    m: &NumericMatrix,
    k: usize,
    schema: &ImputeSchema,
    round_discrete: bool,
    max_iter: usize,
    tol: f64,
) -> Result<Imputation> {
    check_schema(m, schema)?;
    if k == 0 {
        return Err(Error::InvalidArgument("SVD order must be at least 1".into()));
    }
    let rows = m.rows();
    let cols = m.cols();
    for r in 0..rows {
        if m.row_missing(r).iter().all(|&x| x) {
            return Err(Error::InsufficientData(format!("row {r} has no observed entries")));
        }
    }
    for c in 0..cols {
        if (0..rows).all(|r| m.is_missing(r, c)) {
            return Err(Error::EmptyColumn(m.column_names()[c].clone()));
        }
    }
    let mut filled = m.values().to_vec();
    for c in 0..cols {
        let obs = m.observed_column(c);
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        for r in 0..rows {
            if m.is_missing(r, c) {
                filled[r * cols + c] = mean;
            }
        }
    }
    let missing_cells: Vec<usize> = (0..rows * cols).filter(|&i| m.missing_mask()[i]).collect();
    let mut trace = Vec::new();
    let mut converged = missing_cells.is_empty();
    let mut iterations = 0;
    let mut model = LowRankModel::fit(&filled, rows, cols, k);
    if !converged {
        for it in 0..max_iter {
            iterations = it + 1;
            model = LowRankModel::fit(&filled, rows, cols, k);
            let recon: Vec<Vec<f64>> = (0..rows)
                .into_par_iter()
                .map(|r| model.reconstruct(&filled[r * cols..(r + 1) * cols]))
                .collect();
            let mut objective = 0.0;
            for r in 0..rows {
                for c in 0..cols {
                    if !m.is_missing(r, c) {
                        objective += (m.get(r, c) - recon[r][c]).powi(2);
                    }
                }
            }
            trace.push(objective);
            let mut max_change: f64 = 0.0;
            for &i in &missing_cells {
                let v = recon[i / cols][i % cols];
                max_change = max_change.max((v - filled[i]).abs());
                filled[i] = v;
            }
            if max_change < tol {
                converged = true;
                break;
            }
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        let msg = format!("SvdFull did not converge within {max_iter} iterations");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let (matrix, cells) = project_and_round(m, &model, schema, round_discrete);
    Ok(Imputation {
        matrix,
        cells,
        svd_order: k,
        converged,
        iterations,
        objective_trace: trace,
        warnings,
    })
}

/// Dispatches on the policy's imputer.
pub fn impute(m: &NumericMatrix, policy: &MissingnessPolicy, schema: &ImputeSchema) -> Result<Imputation> {
    let k = policy.svd_order.unwrap_or_else(|| default_svd_order(m));
    match policy.imputer {
        Imputer::SvdComplete => impute_svd_complete(m, k, schema, policy.round_discrete),
        Imputer::SvdFull => impute_svd_full(m, k, schema, policy.round_discrete, 500, 1e-9),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_holes(rows: usize, cols: usize, values: Vec<f64>, holes: &[(usize, usize)]) -> NumericMatrix {
        let mut missing = vec![false; rows * cols];
        for &(r, c) in holes {
            missing[r * cols + c] = true;
        }
        let names = (0..cols).map(|c| format!("c{c}")).collect();
        NumericMatrix::new(rows, cols, values, missing, names).unwrap()
    }

    fn policy(dr: f64, dc: f64) -> MissingnessPolicy {
        MissingnessPolicy {
            delta_row: dr,
            delta_column: dc,
            ..Default::default()
        }
    }

    #[test]
    fn complete_matrix_unchanged_by_filter() {
        let m = NumericMatrix::from_rows(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (out, report) = filter_missing(&m, &policy(0.2, 0.3)).unwrap();
        assert_eq!(out, m);
        assert!(report.dropped_rows.is_empty() && report.dropped_columns.is_empty());
    }

    #[test]
    fn all_missing_column_dropped_rows_kept() {
        let m = with_holes(3, 3, vec![1.0; 9], &[(0, 1), (1, 1), (2, 1)]);
        let (out, report) = filter_missing(&m, &policy(0.0, 0.5)).unwrap();
        assert_eq!(report.dropped_columns, vec![1]);
        assert_eq!(out.rows(), 3);
        assert!(out.is_complete());
    }

    #[test]
    fn filter_empty_result_errors() {
        let m = with_holes(1, 1, vec![1.0], &[(0, 0)]);
        assert!(filter_missing(&m, &policy(0.0, 0.5)).is_err());
    }

    #[test]
    fn policy_validation() {
        assert!(policy(1.5, 0.1).validate().is_err());
        let mut p = policy(0.1, 0.1);
        p.svd_order = Some(0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn line_in_3d_recovered_exactly() {
        let dir = [1.0, -2.0, 0.5];
        let values: Vec<f64> = (0..10)
            .flat_map(|i| {
                let t = i as f64 * 0.7 - 2.0;
                dir.iter().map(move |d| 3.0 + d * t).collect::<Vec<_>>()
            })
            .collect();
        let truth = values.clone();
        let m = with_holes(10, 3, values, &[(4, 1), (7, 0)]);
        let imp = impute_svd_complete(&m, 1, &ImputeSchema::all_continuous(3), false).unwrap();
        for cell in &imp.cells {
            let t = truth[cell.row * 3 + cell.column];
            assert!((cell.imputed_value - t).abs() < 1e-8);
        }
        // observed entries untouched
        for r in 0..10 {
            for c in 0..3 {
                if !m.is_missing(r, c) {
                    assert_eq!(imp.matrix.get(r, c), m.get(r, c));
                }
            }
        }
    }

    #[test]
    fn svd_complete_needs_enough_rows() {
        let m = with_holes(2, 2, vec![1.0, 2.0, 3.0, 4.0], &[(0, 0)]);
        assert!(matches!(
            impute_svd_complete(&m, 1, &ImputeSchema::all_continuous(2), false),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rounding_respects_levels_and_groups() {
        // column 0 continuous, column 1 discrete {-1, 1}, columns 2..4 dummy group
        let values = vec![
            0.0, -1.0, 1.0, 0.0, 0.0, //
            1.0, 1.0, 0.0, 1.0, 0.0, //
            2.0, 1.0, 0.0, 0.0, 1.0, //
            3.0, -1.0, 1.0, 0.0, 0.0, //
            0.5, 0.0, 0.0, 0.0, 0.0, //
        ];
        let m = with_holes(5, 5, values, &[(4, 1), (4, 2), (4, 3), (4, 4)]);
        let schema = ImputeSchema {
            roles: vec![
                ColumnRole::Continuous,
                ColumnRole::Discrete(vec![-1.0, 1.0]),
                ColumnRole::Discrete(vec![0.0, 1.0]),
                ColumnRole::Discrete(vec![0.0, 1.0]),
                ColumnRole::Discrete(vec![0.0, 1.0]),
            ],
            exclusive_groups: vec![vec![2, 3, 4]],
        };
        let imp = impute_svd_complete(&m, 2, &schema, true).unwrap();
        let v1 = imp.matrix.get(4, 1);
        assert!(v1 == -1.0 || v1 == 1.0);
        let group: f64 = (2..5).map(|c| imp.matrix.get(4, c)).sum();
        assert_eq!(group, 1.0);
        for c in 2..5 {
            let v = imp.matrix.get(4, c);
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn svd_full_without_missing_is_identity() {
        let m = NumericMatrix::from_rows(3, 2, vec![1.0, 2.0, 3.0, 5.0, 4.0, 4.0]).unwrap();
        let imp = impute_svd_full(&m, 1, &ImputeSchema::all_continuous(2), false, 50, 1e-10).unwrap();
        assert_eq!(imp.matrix, m);
        assert!(imp.cells.is_empty());
    }

    #[test]
    fn svd_full_rejects_empty_rows() {
        let m = with_holes(2, 2, vec![1.0, 2.0, 3.0, 4.0], &[(0, 0), (0, 1)]);
        assert!(impute_svd_full(&m, 1, &ImputeSchema::all_continuous(2), false, 5, 1e-9).is_err());
    }
}
